use std::f64::consts::{PI, SQRT_2};

use super::scale_space::ScaleSpace;
use super::{Descriptor, Keypoint, DESCRIPTOR_LEN};

const CELLS: usize = 4;
const ORI: usize = 8;
/// Width of one spatial cell in units of the keypoint sigma.
const CELL_WIDTH_FACTOR: f64 = 3.0;

/// The keypoint's sample window does not fit inside its octave image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarginViolation;

/// Computes the 4x4x8 descriptor for `kp`, sampling gradients on the Gaussian
/// layer the keypoint was detected at and rotating them into its frame.
pub fn compute_descriptor(space: &ScaleSpace, kp: &Keypoint) -> Result<Descriptor, MarginViolation> {
    let oct = space.octaves.get(kp.octave).ok_or(MarginViolation)?;
    let img = oct.gaussians.get(kp.layer).ok_or(MarginViolation)?;
    let (w, h) = (oct.width as isize, oct.height as isize);
    let (x, y) = kp.octave_xy();
    let (xi, yi) = (x.round() as isize, y.round() as isize);

    let cell = CELL_WIDTH_FACTOR * kp.octave_sigma;
    let radius = (cell * SQRT_2 * (CELLS + 1) as f64 * 0.5).round() as isize;
    if xi - radius < 1 || yi - radius < 1 || xi + radius > w - 2 || yi + radius > h - 2 {
        return Err(MarginViolation);
    }

    let (sin_t, cos_t) = kp.orientation.sin_cos();
    let (sin_t, cos_t) = (sin_t / cell, cos_t / cell);
    let half = CELLS as f64 / 2.0;
    let weight_scale = -1.0 / (2.0 * half * half);
    let bins_per_rad = ORI as f64 / (2.0 * PI);
    let mut hist = [0.0; DESCRIPTOR_LEN];

    for dy in -radius..=radius {
        for dx in -radius..=radius {
            // sample offset expressed in the keypoint frame, in cell units
            let u = dx as f64 * cos_t + dy as f64 * sin_t;
            let v = -(dx as f64) * sin_t + dy as f64 * cos_t;
            let rbin = v + half - 0.5;
            let cbin = u + half - 0.5;
            if rbin <= -1.0 || rbin >= CELLS as f64 || cbin <= -1.0 || cbin >= CELLS as f64 {
                continue;
            }
            let (px, py) = (xi + dx, yi + dy);
            let at = |xx: isize, yy: isize| img[(yy * w + xx) as usize];
            let gx = at(px + 1, py) - at(px - 1, py);
            let gy = at(px, py + 1) - at(px, py - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = (gy.atan2(gx) - kp.orientation).rem_euclid(2.0 * PI);
            let obin = angle * bins_per_rad;
            let weighted = mag * ((u * u + v * v) * weight_scale).exp();
            spread(&mut hist, rbin, cbin, obin, weighted);
        }
    }
    Ok(Descriptor::from_histogram(&hist))
}

/// Trilinear distribution of one sample into the 4x4x8 histogram.
fn spread(hist: &mut [f64; DESCRIPTOR_LEN], rbin: f64, cbin: f64, obin: f64, value: f64) {
    let r0 = rbin.floor();
    let c0 = cbin.floor();
    let o0 = obin.floor();
    let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
    let (r0, c0, o0) = (r0 as isize, c0 as isize, o0 as isize);
    for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
        let r = r0 + dr;
        if r < 0 || r >= CELLS as isize {
            continue;
        }
        for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
            let c = c0 + dc;
            if c < 0 || c >= CELLS as isize {
                continue;
            }
            for (dof, wo) in [(0, 1.0 - fo), (1, fo)] {
                let o = (o0 + dof).rem_euclid(ORI as isize) as usize;
                let idx = (r as usize * CELLS + c as usize) * ORI + o;
                hist[idx] += value * wr * wc * wo;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::GrayImage;
    use crate::sift::{build_scale_space, SiftParams, CLAMP};
    use crate::synthetic;

    fn kp_at(x: f64, y: f64, orientation: f64, space: &ScaleSpace) -> Keypoint {
        Keypoint {
            x,
            y,
            scale: space.layer_sigmas[1],
            orientation,
            octave: 0,
            layer: 1,
            octave_sigma: space.layer_sigmas[1],
        }
    }

    fn cosine(a: &Descriptor, b: &Descriptor) -> f64 {
        let dot: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
        dot / (a.norm() * b.norm())
    }

    #[test]
    fn construction_contract_on_texture() {
        let img = synthetic::texture_image(1, 65, 2);
        let space = build_scale_space(&img, &SiftParams::default()).unwrap();
        for ori in [0.0, 1.0, 2.5, 5.0] {
            let d = compute_descriptor(&space, &kp_at(32.0, 32.0, ori, &space)).unwrap();
            assert_eq!(d.as_slice().len(), 128);
            assert!(d.norm() <= 1.0 + 1e-6);
            assert!(d.as_slice().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rotated_texture_gives_matching_descriptor() {
        let img = synthetic::texture_image(2, 65, 9);
        let rot = img.rotate90();
        let params = SiftParams::default();
        let a_space = build_scale_space(&img, &params).unwrap();
        let b_space = build_scale_space(&rot, &params).unwrap();
        let (x, y) = (30.0, 34.0);
        for theta in [0.3, 1.2, 4.0] {
            let a = compute_descriptor(&a_space, &kp_at(x, y, theta, &a_space)).unwrap();
            // (x, y) -> (h - 1 - y, x); directions turn by +90 degrees
            let kb = kp_at(64.0 - y, x, (theta + PI / 2.0).rem_euclid(2.0 * PI), &b_space);
            let b = compute_descriptor(&b_space, &kb).unwrap();
            let c = cosine(&a, &b);
            assert!(c >= 0.8, "cosine {c}");
        }
    }

    #[test]
    fn flat_neighbourhood_gives_zero_descriptor() {
        let img = GrayImage::constant(64, 64, 0.5);
        let space = build_scale_space(&img, &SiftParams::default()).unwrap();
        let d = compute_descriptor(&space, &kp_at(32.0, 32.0, 0.0, &space)).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn border_keypoint_is_skipped() {
        let img = synthetic::texture_image(0, 64, 1);
        let space = build_scale_space(&img, &SiftParams::default()).unwrap();
        assert_eq!(
            compute_descriptor(&space, &kp_at(3.0, 30.0, 0.0, &space)),
            Err(MarginViolation)
        );
    }

    #[test]
    fn clamp_stage_bounds_entries() {
        let img = synthetic::texture_image(3, 65, 4);
        let space = build_scale_space(&img, &SiftParams::default()).unwrap();
        let d = compute_descriptor(&space, &kp_at(32.0, 32.0, 0.7, &space)).unwrap();
        // renormalizing a clamped vector by its norm (<= 1) keeps the order of entries
        let max = d.as_slice().iter().cloned().fold(0.0, f64::max);
        assert!(max > 0.0);
        let mut staged = [0.0; DESCRIPTOR_LEN];
        staged.copy_from_slice(d.as_slice());
        crate::sift::normalize_and_clamp(&mut staged);
        assert!(staged.iter().all(|&v| (0.0..=CLAMP + 1e-6).contains(&v)));
    }
}
