use std::fmt::Write as _;

use super::{normalize_and_clamp, Descriptor, DescriptorSet, Keypoint, DESCRIPTOR_LEN};
use crate::error::{Error, Result};

/// File suffix for per-image descriptor files: `<image_id>.sift.txt`.
pub const VLFEAT_SUFFIX: &str = ".sift.txt";

const FRAME_FIELDS: usize = 4;

/// Parses VLFeat ASCII output: one keypoint per line, four frame fields
/// (x, y, scale, orientation) followed by 128 descriptor values.
///
/// Frame fields are dropped. Descriptor values (VLFeat writes integers in
/// 0..=255) are divided by their L2 norm, then clamped at 0.2 and
/// renormalized if any entry exceeds the clamp.
pub fn import_vlfeat(text: &str, image_id: impl Into<String>) -> Result<DescriptorSet> {
    let mut descriptors = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != FRAME_FIELDS + DESCRIPTOR_LEN {
            return Err(Error::FieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let mut values = Box::new([0.0; DESCRIPTOR_LEN]);
        for (i, tok) in fields.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::BadToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::BadToken {
                    line: line_no,
                    token: tok.to_string(),
                });
            }
            if i >= FRAME_FIELDS {
                if v < 0.0 {
                    return Err(Error::BadToken {
                        line: line_no,
                        token: tok.to_string(),
                    });
                }
                values[i - FRAME_FIELDS] = v;
            }
        }
        if normalize_and_clamp(&mut values) {
            let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
            values.iter_mut().for_each(|x| *x /= norm);
        }
        descriptors.push(Descriptor::from_normalized(values));
    }
    Ok(DescriptorSet::new(image_id, descriptors))
}

/// Writes descriptors in the VLFeat layout. Frames come from `keypoints` when
/// given (same length as the set), otherwise they are written as zeros.
pub fn write_vlfeat(set: &DescriptorSet, keypoints: Option<&[Keypoint]>) -> String {
    let mut out = String::new();
    for (i, d) in set.descriptors.iter().enumerate() {
        match keypoints.and_then(|k| k.get(i)) {
            Some(k) => {
                let _ = write!(out, "{} {} {} {}", k.x, k.y, k.scale, k.orientation);
            }
            None => out.push_str("0 0 0 0"),
        }
        for v in d.as_slice() {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}
