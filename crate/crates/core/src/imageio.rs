//! Grayscale image container, PGM reading/writing and bilinear resizing.

use crate::error::{Error, Result};

/// Side length every input image is resized to before descriptor extraction.
pub const STANDARD_SIZE: usize = 384;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: pixels.len(),
            });
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel, clamping into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Rotates the image by 90 degrees; pixel `(x, y)` moves to `(height - 1 - y, x)`.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.height, self.width);
        let mut pixels = vec![0.0; w * h];
        for y in 0..self.height {
            for x in 0..self.width {
                pixels[x * w + (self.height - 1 - y)] = self.get(x, y);
            }
        }
        Self {
            width: w,
            height: h,
            pixels,
        }
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            let reason = if start >= self.bytes.len() {
                format!("unexpected end of header while reading {what}")
            } else {
                format!("expected {what}, found byte 0x{:02x}", self.bytes[start])
            };
            return Err(Error::MalformedHeader {
                offset: start,
                reason,
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

/// Parses a binary (`P5`) or ASCII (`P2`) PGM stream, scaling samples by `1 / maxval`.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader {
            offset: 0,
            reason: "missing magic number".into(),
        });
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::UnsupportedMagic {
                offset: 0,
                magic: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader {
            offset: maxval_offset,
            reason: format!("zero dimension {width}x{height}"),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader {
            offset: maxval_offset,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let n = width * height;
    let max = maxval as f64;
    let mut pixels = Vec::with_capacity(n);

    if binary {
        // exactly one whitespace byte separates maxval from the raster
        if cur.pos >= bytes.len() {
            return Err(Error::TruncatedData {
                offset: cur.pos,
                expected: n * if maxval > 255 { 2 } else { 1 },
            });
        }
        if !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::MalformedHeader {
                offset: cur.pos,
                reason: "expected whitespace after maxval".into(),
            });
        }
        let start = cur.pos + 1;
        let sample_bytes = if maxval > 255 { 2 } else { 1 };
        let needed = n * sample_bytes;
        let available = bytes.len() - start;
        if available < needed {
            return Err(Error::TruncatedData {
                offset: bytes.len(),
                expected: needed - available,
            });
        }
        for i in 0..n {
            let off = start + i * sample_bytes;
            let v = if sample_bytes == 2 {
                u16::from_be_bytes([bytes[off], bytes[off + 1]]) as usize
            } else {
                bytes[off] as usize
            };
            if v > maxval {
                return Err(Error::MalformedHeader {
                    offset: off,
                    reason: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            pixels.push(v as f64 / max);
        }
    } else {
        for _ in 0..n {
            cur.skip_space_and_comments();
            if cur.pos >= bytes.len() {
                return Err(Error::TruncatedData {
                    offset: cur.pos,
                    expected: n - pixels.len(),
                });
            }
            let off = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::MalformedHeader {
                    offset: off,
                    reason: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            pixels.push(v as f64 / max);
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Writes a binary PGM with the given maxval (1..=65535), rounding to the nearest level.
pub fn write_pgm(img: &GrayImage, maxval: u16) -> Vec<u8> {
    let maxval = maxval.max(1);
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &p in &img.pixels {
        let v = (p * maxval as f64).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&v.to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    out
}

/// Bilinear resize with pixel-center alignment and clamp-to-edge sampling.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    assert!(out_w >= 1 && out_h >= 1, "target size must be positive");
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;

    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let ty = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let tx = fx - x0 as f64;
            let top = lerp(img.get(x0, y0), img.get(x1, y0), tx);
            let bottom = lerp(img.get(x0, y1), img.get(x1, y1), tx);
            pixels.push(lerp(top, bottom, ty).clamp(0.0, 1.0));
        }
    }
    GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}
