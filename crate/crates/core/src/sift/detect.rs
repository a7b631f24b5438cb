use std::f64::consts::PI;

use super::scale_space::{Octave, ScaleSpace};
use super::{Keypoint, SiftParams};

const BORDER: usize = 5;
const MAX_REFINE_STEPS: usize = 5;
const ORI_BINS: usize = 36;
const ORI_PEAK_RATIO: f64 = 0.8;
const ORI_SIGMA_FACTOR: f64 = 1.5;
const ORI_RADIUS_FACTOR: f64 = 3.0;

/// Finds scale-space extrema of the DoG stack and assigns orientations.
///
/// Output order is deterministic: octave, layer, row, column, then orientation
/// peak order.
pub fn detect_keypoints(space: &ScaleSpace, params: &SiftParams) -> Vec<Keypoint> {
    let s = space.scales_per_octave;
    let prethreshold = 0.5 * params.contrast_threshold;
    let r = params.edge_threshold;
    let edge_limit = (r + 1.0) * (r + 1.0) / r;
    let mut out = Vec::new();

    for (o, oct) in space.octaves.iter().enumerate() {
        let (w, h) = (oct.width, oct.height);
        if w <= 2 * BORDER || h <= 2 * BORDER {
            continue;
        }
        for layer in 1..=s {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    let v = oct.at(&oct.dogs[layer], x, y);
                    if v.abs() <= prethreshold || !is_extremum(oct, layer, x, y, v) {
                        continue;
                    }
                    let Some(cand) = localize(oct, layer, x, y, s, params) else {
                        continue;
                    };
                    if cand.contrast.abs() < params.contrast_threshold {
                        continue;
                    }
                    let (tr, det) = spatial_hessian(oct, cand.layer, cand.x, cand.y);
                    if det <= 0.0 || tr * tr / det >= edge_limit {
                        continue;
                    }

                    let layer_f = cand.layer as f64 + cand.offset[2];
                    let octave_sigma = space.base_sigma * 2f64.powf(layer_f / s as f64);
                    let gauss_layer = (layer_f.round() as usize).clamp(1, s);
                    let factor = (1usize << o) as f64;
                    let ox = cand.x as f64 + cand.offset[0];
                    let oy = cand.y as f64 + cand.offset[1];
                    for orientation in orientations(oct, gauss_layer, ox, oy, octave_sigma) {
                        out.push(Keypoint {
                            x: ox * factor,
                            y: oy * factor,
                            scale: octave_sigma * factor,
                            orientation,
                            octave: o,
                            layer: gauss_layer,
                            octave_sigma,
                        });
                    }
                }
            }
        }
    }
    out
}

fn is_extremum(oct: &Octave, layer: usize, x: usize, y: usize, v: f64) -> bool {
    let is_max = v > 0.0;
    for l in layer - 1..=layer + 1 {
        let d = &oct.dogs[l];
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if l == layer && yy == y && xx == x {
                    continue;
                }
                let n = oct.at(d, xx, yy);
                if (is_max && n >= v) || (!is_max && n <= v) {
                    return false;
                }
            }
        }
    }
    true
}

struct Candidate {
    x: usize,
    y: usize,
    layer: usize,
    offset: [f64; 3],
    contrast: f64,
}

fn gradient_and_hessian(oct: &Octave, l: usize, x: usize, y: usize) -> ([f64; 3], [[f64; 3]; 3]) {
    let d = |dl: isize, dx: isize, dy: isize| {
        let layer = &oct.dogs[(l as isize + dl) as usize];
        oct.at(
            layer,
            (x as isize + dx) as usize,
            (y as isize + dy) as usize,
        )
    };
    let c = d(0, 0, 0);
    let g = [
        0.5 * (d(0, 1, 0) - d(0, -1, 0)),
        0.5 * (d(0, 0, 1) - d(0, 0, -1)),
        0.5 * (d(1, 0, 0) - d(-1, 0, 0)),
    ];
    let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * c;
    let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * c;
    let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * c;
    let dxy = 0.25 * (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1));
    let dxs = 0.25 * (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0));
    let dys = 0.25 * (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1));
    (g, [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-18 {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        let d = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        *xi = d / det;
    }
    Some(x)
}

fn localize(
    oct: &Octave,
    layer: usize,
    x: usize,
    y: usize,
    s: usize,
    params: &SiftParams,
) -> Option<Candidate> {
    let value = oct.at(&oct.dogs[layer], x, y);
    if !params.refine {
        return Some(Candidate {
            x,
            y,
            layer,
            offset: [0.0; 3],
            contrast: value,
        });
    }
    let (mut x, mut y, mut layer) = (x, y, layer);
    for _ in 0..MAX_REFINE_STEPS {
        let (g, hess) = gradient_and_hessian(oct, layer, x, y);
        let step = solve3(hess, g)?;
        let offset = [-step[0], -step[1], -step[2]];
        if offset.iter().all(|o| o.abs() < 0.5) {
            let v = oct.at(&oct.dogs[layer], x, y);
            let contrast = v + 0.5 * (g[0] * offset[0] + g[1] * offset[1] + g[2] * offset[2]);
            return Some(Candidate {
                x,
                y,
                layer,
                offset,
                contrast,
            });
        }
        let nx = x as isize + offset[0].round() as isize;
        let ny = y as isize + offset[1].round() as isize;
        let nl = layer as isize + offset[2].round() as isize;
        if nl < 1
            || nl > s as isize
            || nx < BORDER as isize
            || ny < BORDER as isize
            || nx >= (oct.width - BORDER) as isize
            || ny >= (oct.height - BORDER) as isize
        {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        layer = nl as usize;
    }
    None
}

fn spatial_hessian(oct: &Octave, layer: usize, x: usize, y: usize) -> (f64, f64) {
    let d = &oct.dogs[layer];
    let c = oct.at(d, x, y);
    let dxx = oct.at(d, x + 1, y) + oct.at(d, x - 1, y) - 2.0 * c;
    let dyy = oct.at(d, x, y + 1) + oct.at(d, x, y - 1) - 2.0 * c;
    let dxy = 0.25
        * (oct.at(d, x + 1, y + 1) - oct.at(d, x - 1, y + 1) - oct.at(d, x + 1, y - 1)
            + oct.at(d, x - 1, y - 1));
    (dxx + dyy, dxx * dyy - dxy * dxy)
}

/// Dominant orientations from a smoothed 36-bin gradient histogram.
pub(crate) fn orientations(oct: &Octave, layer: usize, x: f64, y: f64, sigma: f64) -> Vec<f64> {
    let img = &oct.gaussians[layer];
    let (w, h) = (oct.width as isize, oct.height as isize);
    let sigma_w = ORI_SIGMA_FACTOR * sigma;
    let radius = (ORI_RADIUS_FACTOR * sigma_w).round() as isize;
    let (xi, yi) = (x.round() as isize, y.round() as isize);
    let mut hist = [0.0; ORI_BINS];
    for dy in -radius..=radius {
        let py = yi + dy;
        if py < 1 || py >= h - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let px = xi + dx;
            if px < 1 || px >= w - 1 {
                continue;
            }
            let at = |xx: isize, yy: isize| img[(yy * w + xx) as usize];
            let gx = at(px + 1, py) - at(px - 1, py);
            let gy = at(px, py + 1) - at(px, py - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let weight = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_w * sigma_w)).exp();
            let angle = gy.atan2(gx).rem_euclid(2.0 * PI);
            let bin = ((angle * ORI_BINS as f64 / (2.0 * PI)).round() as usize) % ORI_BINS;
            hist[bin] += weight * mag;
        }
    }
    let n = ORI_BINS;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            (hist[(i + n - 2) % n] + hist[(i + 2) % n]) / 16.0
                + (hist[(i + n - 1) % n] + hist[(i + 1) % n]) * 4.0 / 16.0
                + hist[i] * 6.0 / 16.0
        })
        .collect();
    let max = smooth.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..n {
        let l = smooth[(i + n - 1) % n];
        let r = smooth[(i + 1) % n];
        let c = smooth[i];
        if c > l && c > r && c >= ORI_PEAK_RATIO * max {
            let denom = l - 2.0 * c + r;
            let shift = if denom != 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            let bin = i as f64 + shift;
            out.push((bin * 2.0 * PI / n as f64).rem_euclid(2.0 * PI));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::GrayImage;
    use crate::sift::build_scale_space;
    use crate::synthetic;

    fn blob(size: usize, cx: f64, cy: f64, s: f64) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            (-d2 / (2.0 * s * s)).exp()
        })
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let params = SiftParams::default();
        let space = build_scale_space(&GrayImage::constant(64, 64, 0.8), &params).unwrap();
        assert!(detect_keypoints(&space, &params).is_empty());
    }

    #[test]
    fn single_blob_is_found_near_center() {
        let params = SiftParams::default();
        let img = blob(64, 32.0, 32.0, 4.0);
        let space = build_scale_space(&img, &params).unwrap();
        let kps = detect_keypoints(&space, &params);
        assert!(!kps.is_empty());
        let best = kps
            .iter()
            .map(|k| ((k.x - 32.0).powi(2) + (k.y - 32.0).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 2.0, "closest keypoint {best} px from center");
    }

    #[test]
    fn rotated_image_keeps_keypoint_count() {
        let params = SiftParams::default();
        let img = synthetic::texture_image(0, 129, 11);
        let a = detect_keypoints(&build_scale_space(&img, &params).unwrap(), &params).len();
        let b = detect_keypoints(&build_scale_space(&img.rotate90(), &params).unwrap(), &params)
            .len();
        assert!(a > 0);
        let rel = (a as f64 - b as f64).abs() / a.max(b) as f64;
        assert!(rel <= 0.2, "{a} vs {b}");
    }

    #[test]
    fn adding_a_constant_does_not_move_keypoints() {
        let params = SiftParams::default();
        let img = synthetic::texture_image(3, 96, 5);
        let dim = GrayImage::from_fn(96, 96, |x, y| 0.5 * img.get(x, y));
        let lifted = GrayImage::from_fn(96, 96, |x, y| 0.5 * img.get(x, y) + 0.25);
        let a = detect_keypoints(&build_scale_space(&dim, &params).unwrap(), &params);
        let b = detect_keypoints(&build_scale_space(&lifted, &params).unwrap(), &params);
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!((p.x - q.x).abs() < 1e-6 && (p.y - q.y).abs() < 1e-6);
            assert!((p.scale - q.scale).abs() < 1e-6);
        }
    }
}
