//! Scale-invariant local descriptors.
//!
//! Descriptors come from one of two sources that share [`DescriptorSet`]:
//! the built-in difference-of-Gaussians extractor ([`extract`]) or text files
//! in the VLFeat `sift` ASCII layout ([`import_vlfeat`]). The built-in
//! extractor follows Lowe's construction but is not bit-compatible with any
//! particular SIFT binary.

mod descriptor;
mod detect;
mod scale_space;
mod vlfeat;

pub use descriptor::{compute_descriptor, MarginViolation};
pub use detect::detect_keypoints;
pub use scale_space::{build_scale_space, gaussian_blur, Octave, ScaleSpace};
pub use vlfeat::{import_vlfeat, write_vlfeat, VLFEAT_SUFFIX};

use crate::error::Result;
use crate::imageio::GrayImage;

/// Descriptor length: 4x4 spatial cells times 8 orientation bins.
pub const DESCRIPTOR_LEN: usize = 128;

/// Entries are clamped at this value between the two normalizations.
pub const CLAMP: f64 = 0.2;

/// A 128-bin gradient-orientation histogram, L2-normalized, clamped, renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(Box<[f64; DESCRIPTOR_LEN]>);

impl Descriptor {
    /// Applies the normalize / clamp / renormalize sequence to raw histogram values.
    ///
    /// Negative or non-finite inputs are treated as zero. An all-zero input
    /// stays all-zero.
    pub fn from_histogram(raw: &[f64; DESCRIPTOR_LEN]) -> Self {
        let mut v = Box::new([0.0; DESCRIPTOR_LEN]);
        for (o, &r) in v.iter_mut().zip(raw.iter()) {
            *o = if r.is_finite() && r > 0.0 { r } else { 0.0 };
        }
        let clamped = normalize_and_clamp(&mut v);
        if clamped {
            normalize(&mut v);
        }
        Self(v)
    }

    /// Wraps values that already satisfy the descriptor invariants.
    pub(crate) fn from_normalized(v: Box<[f64; DESCRIPTOR_LEN]>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0[..]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Normalizes to unit length, then clamps entries at [`CLAMP`]. Returns whether
/// any entry was clamped.
pub(crate) fn normalize_and_clamp(v: &mut [f64; DESCRIPTOR_LEN]) -> bool {
    if !normalize(v) {
        return false;
    }
    let mut clamped = false;
    for x in v.iter_mut() {
        if *x > CLAMP {
            *x = CLAMP;
            clamped = true;
        }
    }
    clamped
}

fn normalize(v: &mut [f64; DESCRIPTOR_LEN]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= f64::MIN_POSITIVE {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

/// Keypoint frame in original-image pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Blur level sigma in original-image pixels.
    pub scale: f64,
    /// Dominant gradient direction in `[0, 2*pi)`, image coordinates (y down).
    pub orientation: f64,
    pub octave: usize,
    /// Gaussian layer within the octave used for orientation and description.
    pub layer: usize,
    /// Blur level sigma in octave pixels.
    pub octave_sigma: f64,
}

impl Keypoint {
    pub(crate) fn octave_xy(&self) -> (f64, f64) {
        let f = (1usize << self.octave) as f64;
        (self.x / f, self.y / f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub image_id: String,
    pub descriptors: Vec<Descriptor>,
}

impl DescriptorSet {
    pub fn new(image_id: impl Into<String>, descriptors: Vec<Descriptor>) -> Self {
        Self {
            image_id: image_id.into(),
            descriptors,
        }
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftParams {
    pub n_octaves: usize,
    pub scales_per_octave: usize,
    pub base_sigma: f64,
    pub contrast_threshold: f64,
    pub edge_threshold: f64,
    /// Quadratic sub-pixel refinement of extrema.
    pub refine: bool,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            n_octaves: 4,
            scales_per_octave: 3,
            base_sigma: 1.6,
            contrast_threshold: 0.03,
            edge_threshold: 10.0,
            refine: true,
        }
    }
}

impl SiftParams {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.n_octaves == 0 || self.scales_per_octave == 0 {
            return Err(Error::InvalidParameter(
                "octave and scale counts must be positive".into(),
            ));
        }
        if !(self.base_sigma.is_finite() && self.base_sigma > 0.0) {
            return Err(Error::InvalidParameter("base_sigma must be positive".into()));
        }
        if !(self.contrast_threshold.is_finite() && self.contrast_threshold >= 0.0) {
            return Err(Error::InvalidParameter(
                "contrast_threshold must be finite and non-negative".into(),
            ));
        }
        if !(self.edge_threshold.is_finite() && self.edge_threshold > 1.0) {
            return Err(Error::InvalidParameter(
                "edge_threshold must be finite and > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Detects keypoints and describes them; keypoints too close to the border
/// for a full sample grid are skipped.
pub fn extract_with_keypoints(
    img: &GrayImage,
    params: &SiftParams,
) -> Result<(Vec<Keypoint>, Vec<Descriptor>)> {
    let space = build_scale_space(img, params)?;
    let mut kps = Vec::new();
    let mut descs = Vec::new();
    for kp in detect_keypoints(&space, params) {
        if let Ok(d) = compute_descriptor(&space, &kp) {
            kps.push(kp);
            descs.push(d);
        }
    }
    Ok((kps, descs))
}

pub fn extract(
    img: &GrayImage,
    params: &SiftParams,
    image_id: impl Into<String>,
) -> Result<DescriptorSet> {
    let (_, descs) = extract_with_keypoints(img, params)?;
    Ok(DescriptorSet::new(image_id, descs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn constant_image_has_no_descriptors() {
        let img = GrayImage::constant(384, 384, 0.4);
        let set = extract(&img, &SiftParams::default(), "flat").unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn texture_yields_valid_descriptors() {
        let img = synthetic::texture_image(2, 128, 7);
        let set = extract(&img, &SiftParams::default(), "t").unwrap();
        assert!(!set.is_empty());
        for d in &set.descriptors {
            assert_eq!(d.as_slice().len(), DESCRIPTOR_LEN);
            assert!(d.norm() <= 1.0 + 1e-6);
            assert!(d.as_slice().iter().all(|x| x.is_finite() && *x >= 0.0));
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = synthetic::texture_image(1, 96, 3);
        let a = extract(&img, &SiftParams::default(), "a").unwrap();
        let b = extract(&img, &SiftParams::default(), "a").unwrap();
        assert_eq!(a, b);
        let bits = |s: &DescriptorSet| -> Vec<u64> {
            s.descriptors
                .iter()
                .flat_map(|d| d.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>())
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn histogram_normalization_contract() {
        let mut raw = [0.0; DESCRIPTOR_LEN];
        raw[0] = 10.0;
        for (i, r) in raw.iter_mut().enumerate().skip(1) {
            *r = (i % 7) as f64 * 0.1;
        }
        let mut staged = raw;
        assert!(normalize_and_clamp(&mut staged));
        assert!(staged.iter().all(|&x| (0.0..=CLAMP + 1e-12).contains(&x)));
        let d = Descriptor::from_histogram(&raw);
        assert!((d.norm() - 1.0).abs() < 1e-12);

        let zero = Descriptor::from_histogram(&[0.0; DESCRIPTOR_LEN]);
        assert!(zero.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn params_validation() {
        assert!(SiftParams::default().validate().is_ok());
        let bad = SiftParams {
            edge_threshold: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
