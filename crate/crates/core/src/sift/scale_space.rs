use super::SiftParams;
use crate::error::{Error, Result};
use crate::imageio::GrayImage;

/// Blur already present in a captured image, by convention.
const INPUT_SIGMA: f64 = 0.5;
const MIN_OCTAVE_SIDE: usize = 8;

#[derive(Debug, Clone)]
pub struct Octave {
    pub width: usize,
    pub height: usize,
    /// `scales_per_octave + 3` blurred images.
    pub gaussians: Vec<Vec<f64>>,
    /// `scales_per_octave + 2` differences of adjacent Gaussian layers.
    pub dogs: Vec<Vec<f64>>,
}

impl Octave {
    #[inline]
    pub fn at(&self, layer: &[f64], x: usize, y: usize) -> f64 {
        layer[y * self.width + x]
    }
}

#[derive(Debug, Clone)]
pub struct ScaleSpace {
    pub octaves: Vec<Octave>,
    /// Absolute blur of Gaussian layer `i` in octave pixels (same for every octave).
    pub layer_sigmas: Vec<f64>,
    pub scales_per_octave: usize,
    pub base_sigma: f64,
}

/// Builds the Gaussian and difference-of-Gaussian pyramid.
///
/// Octaves whose shorter side would fall below 8 pixels are dropped; inputs
/// smaller than 16x16 are rejected.
pub fn build_scale_space(img: &GrayImage, params: &SiftParams) -> Result<ScaleSpace> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    if w < 2 * MIN_OCTAVE_SIDE || h < 2 * MIN_OCTAVE_SIDE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    let mut n_octaves = 0;
    while n_octaves < params.n_octaves && (w.min(h) >> n_octaves) >= MIN_OCTAVE_SIDE {
        n_octaves += 1;
    }

    let s = params.scales_per_octave;
    let k = 2f64.powf(1.0 / s as f64);
    let layer_sigmas: Vec<f64> = (0..s + 3)
        .map(|i| params.base_sigma * k.powi(i as i32))
        .collect();
    // incremental blur taking layer i-1 to layer i
    let increments: Vec<f64> = (1..s + 3)
        .map(|i| (layer_sigmas[i].powi(2) - layer_sigmas[i - 1].powi(2)).sqrt())
        .collect();

    let first_blur = (params.base_sigma.powi(2) - INPUT_SIGMA * INPUT_SIGMA)
        .max(0.01)
        .sqrt();
    let mut base = gaussian_blur(img.pixels(), w, h, first_blur);
    let (mut ow, mut oh) = (w, h);
    let mut octaves = Vec::with_capacity(n_octaves);
    for o in 0..n_octaves {
        if o > 0 {
            let prev: &Octave = &octaves[o - 1];
            let (nw, nh) = (ow / 2, oh / 2);
            base = downsample(&prev.gaussians[s], ow, nw, nh);
            ow = nw;
            oh = nh;
        }
        let mut gaussians = Vec::with_capacity(s + 3);
        gaussians.push(base.clone());
        for inc in &increments {
            let next = gaussian_blur(gaussians.last().unwrap(), ow, oh, *inc);
            gaussians.push(next);
        }
        let dogs = gaussians
            .windows(2)
            .map(|pair| pair[1].iter().zip(&pair[0]).map(|(b, a)| b - a).collect())
            .collect();
        octaves.push(Octave {
            width: ow,
            height: oh,
            gaussians,
            dogs,
        });
    }
    Ok(ScaleSpace {
        octaves,
        layer_sigmas,
        scales_per_octave: s,
        base_sigma: params.base_sigma,
    })
}

fn downsample(src: &[f64], src_w: usize, w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(src[(2 * y) * src_w + 2 * x]);
        }
    }
    out
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = ((4.0 * sigma).ceil() as usize).max(1);
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian blur with clamp-to-edge borders.
///
/// Each output is formed as `center + sum(w_i * (p_i - center))`, so constant
/// regions are reproduced exactly.
pub fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let c = row[x];
            let mut acc = 0.0;
            for (i, kw) in kernel.iter().enumerate() {
                let xx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kw * (row[xx] - c);
            }
            tmp[y * w + x] = c + acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let c = tmp[y * w + x];
            let mut acc = 0.0;
            for (i, kw) in kernel.iter().enumerate() {
                let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
                acc += kw * (tmp[yy * w + x] - c);
            }
            out[y * w + x] = c + acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_zero_dog() {
        let img = GrayImage::constant(64, 48, 0.37);
        let space = build_scale_space(&img, &SiftParams::default()).unwrap();
        for o in &space.octaves {
            for d in &o.dogs {
                assert!(d.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn octave_structure() {
        let img = GrayImage::from_fn(96, 64, |x, y| ((x ^ y) & 1) as f64);
        let params = SiftParams {
            n_octaves: 3,
            ..Default::default()
        };
        let space = build_scale_space(&img, &params).unwrap();
        assert_eq!(space.octaves.len(), 3);
        let dims: Vec<_> = space.octaves.iter().map(|o| (o.width, o.height)).collect();
        assert_eq!(dims, vec![(96, 64), (48, 32), (24, 16)]);
        for o in &space.octaves {
            assert_eq!(o.dogs.len(), params.scales_per_octave + 2);
            assert_eq!(o.gaussians.len(), params.scales_per_octave + 3);
        }
    }

    #[test]
    fn octaves_truncate_and_tiny_images_fail() {
        let img = GrayImage::constant(20, 40, 0.0);
        let space = build_scale_space(&img, &SiftParams::default()).unwrap();
        assert_eq!(space.octaves.len(), 2);
        let tiny = GrayImage::constant(15, 40, 0.0);
        assert!(matches!(
            build_scale_space(&tiny, &SiftParams::default()),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn blur_preserves_mass_in_interior() {
        let mut px = vec![0.0; 41 * 41];
        px[20 * 41 + 20] = 1.0;
        let out = gaussian_blur(&px, 41, 41, 2.0);
        let total: f64 = out.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
