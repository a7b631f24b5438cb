//! Shared fixtures for the benchmarks.

use sibow::codebook::{build_pool, kmeans, Codebook, KMeansParams};
use sibow::sift::{extract, DescriptorSet, SiftParams};
use sibow::synthetic::{gaussian_classes, texture_image, TEXTURE_CLASSES};

/// Descriptors from one synthetic texture per class.
pub fn texture_descriptors(size: usize) -> Vec<DescriptorSet> {
    (0..TEXTURE_CLASSES)
        .map(|c| extract(&texture_image(c, size, 7), &SiftParams::default(), format!("t{c}")).unwrap())
        .collect()
}

pub fn codebook(sets: &[DescriptorSet], m: usize) -> Codebook {
    let pool = build_pool(sets).unwrap();
    kmeans(&pool, m, &KMeansParams { n_init: 1, ..Default::default() }).unwrap()
}

/// Three Gaussian classes in 2-D with `n` points each.
pub fn gaussian_problem(n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    gaussian_classes(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]], 1.0, n, 11)
}
