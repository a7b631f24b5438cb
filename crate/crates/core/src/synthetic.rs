//! Seeded synthetic data: four texture classes of grayscale images and
//! Gaussian point clouds for classifier checks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::imageio::GrayImage;

/// Number of texture classes produced by [`texture_image`].
pub const TEXTURE_CLASSES: usize = 4;

/// A `size` x `size` texture of class `class % 4`:
/// 0 = scattered bright blobs, 1 = oriented gratings,
/// 2 = jittered checkerboard, 3 = concentric rings.
pub fn texture_image(class: usize, size: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((class as u64) << 32));
    let s = size as f64;
    let mut px = match class % TEXTURE_CLASSES {
        0 => {
            let n = (s * s / 180.0) as usize + 4;
            let blobs: Vec<(f64, f64, f64)> = (0..n)
                .map(|_| {
                    (
                        rng.random::<f64>() * s,
                        rng.random::<f64>() * s,
                        1.5 + 2.0 * rng.random::<f64>(),
                    )
                })
                .collect();
            grid(size, |x, y| {
                let v: f64 = blobs
                    .iter()
                    .map(|&(bx, by, r)| {
                        (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * r * r)).exp()
                    })
                    .sum();
                0.1 + 0.8 * v.min(1.0)
            })
        }
        1 => {
            let theta = rng.random::<f64>() * PI;
            let period = 7.0 + 3.0 * rng.random::<f64>();
            let phase = rng.random::<f64>() * 2.0 * PI;
            let (st, ct) = theta.sin_cos();
            grid(size, |x, y| {
                0.5 + 0.4 * ((x * ct + y * st) * 2.0 * PI / period + phase).sin()
            })
        }
        2 => {
            let cell = 9.0 + 4.0 * rng.random::<f64>();
            let (ox, oy) = (rng.random::<f64>() * cell, rng.random::<f64>() * cell);
            grid(size, |x, y| {
                let cx = ((x + ox) / cell).floor() as i64;
                let cy = ((y + oy) / cell).floor() as i64;
                if (cx + cy).rem_euclid(2) == 0 {
                    0.2
                } else {
                    0.8
                }
            })
        }
        _ => {
            let (cx, cy) = (
                s * (0.3 + 0.4 * rng.random::<f64>()),
                s * (0.3 + 0.4 * rng.random::<f64>()),
            );
            let period = 10.0 + 4.0 * rng.random::<f64>();
            grid(size, |x, y| {
                let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                0.5 + 0.4 * (r * 2.0 * PI / period).cos()
            })
        }
    };
    for p in px.iter_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *p = (*p + 0.02 * n).clamp(0.0, 1.0);
    }
    GrayImage::new(size, size, px).expect("texture pixels are clamped")
}

fn grid(size: usize, mut f: impl FnMut(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            out.push(f(x as f64, y as f64));
        }
    }
    out
}

/// Draws `n_per_class` points around each mean with isotropic standard
/// deviation `sd`. Labels are 1-based class indices, interleaved by class.
pub fn gaussian_classes(
    means: &[Vec<f64>],
    sd: f64,
    n_per_class: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(means.len() * n_per_class);
    let mut ys = Vec::with_capacity(means.len() * n_per_class);
    for _ in 0..n_per_class {
        for (k, mu) in means.iter().enumerate() {
            let x = mu
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + sd * z
                })
                .collect();
            xs.push(x);
            ys.push(k + 1);
        }
    }
    (xs, ys)
}
