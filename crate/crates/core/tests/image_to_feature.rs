use sibow::artifact::ArtifactMeta;
use sibow::codebook::{build_pool, kmeans, KMeansParams};
use sibow::encoding::{encode_image, Encoder, LlcParams};
use sibow::pooling::{featurize, FeatureSet, PoolingId};
use sibow::sift::{extract, import_vlfeat, write_vlfeat};
use sibow::synthetic::texture_image;
use sibow::SiftParams;

#[test]
fn textures_flow_from_pixels_to_pooled_features() {
    let params = SiftParams::default();
    let sets: Vec<_> = (0..4)
        .map(|i| extract(&texture_image(2 * (i % 2), 128, i as u64), &params, format!("img{i}")).unwrap())
        .collect();
    let counts: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    assert!(counts.iter().all(|&n| n > 0), "{counts:?}");
    for s in &sets {
        for d in &s.descriptors {
            assert!((d.norm() - 1.0).abs() < 1e-9);
        }
    }

    // reimport clamps again, so directions stay close but not identical
    let back = import_vlfeat(&write_vlfeat(&sets[0], None), "img0").unwrap();
    assert_eq!(back.len(), sets[0].len());
    for (a, b) in back.descriptors.iter().zip(&sets[0].descriptors) {
        let cos: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert!(cos > 0.95, "{cos}");
    }

    let pool = build_pool(&sets).unwrap();
    let codebook = kmeans(&pool, 8, &KMeansParams::default()).unwrap();
    assert_eq!((codebook.size(), codebook.dim()), (8, 128));

    let id: PoolingId = "sum-LTF".parse().unwrap();
    for enc in [Encoder::Vq, Encoder::Llc, Encoder::FastLlc] {
        let rows: Vec<_> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let codes = encode_image(s, &codebook, enc, &LlcParams::default()).unwrap();
                assert_eq!(codes.len(), s.len());
                featurize(&codes, id, enc.into(), s.image_id.clone(), Some(i % 2 + 1))
            })
            .collect();
        for r in &rows {
            assert_eq!(r.values.len(), 8);
            assert!(r.values.iter().all(|v| v.is_finite()));
            assert!(!r.degenerate);
        }
        let fs = FeatureSet::new(8, id, rows).unwrap();
        let meta = ArtifactMeta {
            config_hash: format!("{enc:?}"),
            upstream: vec![],
        };
        let (again, m) = FeatureSet::from_bytes(&fs.to_bytes(&meta)).unwrap();
        assert_eq!(again, fs);
        assert_eq!(m, meta);
    }
}
