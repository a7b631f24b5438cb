//! Pooling of visual codes into a single image feature, followed by
//! sum, L2 or log-term-frequency (LTF) normalization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::artifact::{ArtifactMeta, Reader, Writer};
use crate::encoding::{CodeMatrix, Encoder};
use crate::error::{Error, Result};

const SBWF_MAGIC: &[u8; 4] = b"SBWF";

/// Which encoder family produced the codes. LTF treats the two differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Vq,
    Llc,
}

impl From<Encoder> for Source {
    fn from(e: Encoder) -> Self {
        if e.is_vq() {
            Source::Vq
        } else {
            Source::Llc
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolMode {
    Sum,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormMode {
    Sum,
    L2,
    Ltf,
}

/// A pooling/normalization pair such as `sum-LTF`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolingId {
    pub pool: PoolMode,
    pub norm: NormMode,
}

impl PoolingId {
    pub const ALL: [PoolingId; 6] = [
        PoolingId::new(PoolMode::Sum, NormMode::Sum),
        PoolingId::new(PoolMode::Sum, NormMode::L2),
        PoolingId::new(PoolMode::Sum, NormMode::Ltf),
        PoolingId::new(PoolMode::Max, NormMode::Sum),
        PoolingId::new(PoolMode::Max, NormMode::L2),
        PoolingId::new(PoolMode::Max, NormMode::Ltf),
    ];

    pub const fn new(pool: PoolMode, norm: NormMode) -> Self {
        Self { pool, norm }
    }

    fn code(self) -> u8 {
        Self::ALL.iter().position(|&p| p == self).unwrap() as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for PoolingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.pool {
            PoolMode::Sum => "sum",
            PoolMode::Max => "max",
        };
        let n = match self.norm {
            NormMode::Sum => "sum",
            NormMode::L2 => "L2",
            NormMode::Ltf => "LTF",
        };
        write!(f, "{p}-{n}")
    }
}

impl FromStr for PoolingId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown pooling id '{s}'")))
    }
}

impl Serialize for PoolingId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PoolingId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledVector {
    pub values: Vec<f64>,
    pub source: Source,
    pub mode: PoolMode,
    /// Set when pooled from an empty code matrix.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFeature {
    pub values: Vec<f64>,
    pub pooling_id: PoolingId,
    pub image_id: String,
    /// 1-based class index.
    pub label: Option<usize>,
    /// Set for all-zero features that could not be normalized.
    pub degenerate: bool,
}

/// Column-wise sum or max over the codes. Absent sparse entries count as 0.
pub fn pool(codes: &CodeMatrix, mode: PoolMode, source: Source) -> PooledVector {
    let m = codes.m;
    let n = codes.codes.len();
    let mut values = vec![0.0; m];
    match mode {
        PoolMode::Sum => {
            for c in &codes.codes {
                for (&j, &w) in c.indices().iter().zip(c.weights()) {
                    values[j] += w;
                }
            }
        }
        PoolMode::Max => {
            let mut seen = vec![0usize; m];
            let mut best = vec![f64::NEG_INFINITY; m];
            for c in &codes.codes {
                for (&j, &w) in c.indices().iter().zip(c.weights()) {
                    seen[j] += 1;
                    best[j] = best[j].max(w);
                }
            }
            for j in 0..m {
                values[j] = if seen[j] == 0 {
                    0.0
                } else if seen[j] < n {
                    best[j].max(0.0)
                } else {
                    best[j]
                };
            }
        }
    }
    PooledVector {
        values,
        source,
        mode,
        degenerate: n == 0,
    }
}

fn ltf_vq(v: f64) -> f64 {
    if v > 0.0 {
        1.0 + v.log10()
    } else {
        0.0
    }
}

/// Normalizes a pooled vector. Returns the values and whether the input
/// was degenerate (no mass to normalize).
pub fn normalize_values(q: &PooledVector, mode: NormMode) -> (Vec<f64>, bool) {
    let v = &q.values;
    match mode {
        NormMode::Sum => {
            let total: f64 = v.iter().sum();
            if total == 0.0 {
                (v.clone(), true)
            } else {
                (v.iter().map(|x| x / total).collect(), false)
            }
        }
        NormMode::L2 => {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                (v.clone(), true)
            } else {
                (v.iter().map(|x| x / norm).collect(), false)
            }
        }
        NormMode::Ltf => match q.source {
            Source::Vq => {
                let out: Vec<f64> = v.iter().map(|&x| ltf_vq(x)).collect();
                let zero = out.iter().all(|&x| x == 0.0);
                (out, zero)
            }
            Source::Llc => {
                let min_pos = v
                    .iter()
                    .copied()
                    .filter(|&x| x > 0.0)
                    .fold(f64::INFINITY, f64::min);
                if !min_pos.is_finite() {
                    return (vec![0.0; v.len()], true);
                }
                let out = v
                    .iter()
                    .map(|&x| if x > 0.0 { ltf_vq(x / min_pos) } else { 0.0 })
                    .collect();
                (out, false)
            }
        },
    }
}

pub fn normalize(q: &PooledVector, mode: NormMode) -> ImageFeature {
    let (values, degenerate) = normalize_values(q, mode);
    ImageFeature {
        values,
        pooling_id: PoolingId::new(q.mode, mode),
        image_id: String::new(),
        label: None,
        degenerate: degenerate || q.degenerate,
    }
}

pub fn featurize(
    codes: &CodeMatrix,
    id: PoolingId,
    source: Source,
    image_id: impl Into<String>,
    label: Option<usize>,
) -> ImageFeature {
    let mut f = normalize(&pool(codes, id.pool, source), id.norm);
    f.image_id = image_id.into();
    f.label = label;
    f
}

/// Features of a set of images sharing M and pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub m: usize,
    pub pooling_id: PoolingId,
    pub rows: Vec<ImageFeature>,
}

impl FeatureSet {
    pub fn new(m: usize, pooling_id: PoolingId, rows: Vec<ImageFeature>) -> Result<Self> {
        for r in &rows {
            if r.values.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: r.values.len(),
                });
            }
            if r.pooling_id != pooling_id {
                return Err(Error::Incompatible(format!(
                    "feature '{}' pooled as {} but set expects {pooling_id}",
                    r.image_id, r.pooling_id
                )));
            }
        }
        Ok(Self { m, pooling_id, rows })
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label.unwrap_or(0)).collect()
    }

    /// CSV with header `image_id,label,q_0..q_{M-1}`; unlabeled rows leave
    /// the label empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["image_id".to_string(), "label".to_string()];
        header.extend((0..self.m).map(|j| format!("q_{j}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.image_id.clone(),
                r.label.map(|l| l.to_string()).unwrap_or_default(),
            ];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Incompatible(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str, pooling_id: PoolingId) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let m = r.headers()?.len().saturating_sub(2);
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |tok: &str| Error::BadToken {
                line: i + 2,
                token: tok.to_string(),
            };
            let label = match rec.get(1).unwrap_or("") {
                "" => None,
                s => Some(s.parse().map_err(|_| bad(s))?),
            };
            let values = rec
                .iter()
                .skip(2)
                .map(|s| s.parse::<f64>().map_err(|_| bad(s)))
                .collect::<Result<Vec<_>>>()?;
            let degenerate = values.iter().all(|&v| v == 0.0);
            rows.push(ImageFeature {
                values,
                pooling_id,
                image_id: rec.get(0).unwrap_or("").to_string(),
                label,
                degenerate,
            });
        }
        Self::new(m, pooling_id, rows)
    }

    pub fn to_bytes(&self, meta: &ArtifactMeta) -> Vec<u8> {
        let mut w = Writer::new(SBWF_MAGIC);
        w.u32(self.m as u32)
            .u8(self.pooling_id.code())
            .u64(self.rows.len() as u64);
        for r in &self.rows {
            w.str(&r.image_id)
                .u32(r.label.unwrap_or(0) as u32)
                .u8(r.degenerate as u8)
                .f64s(&r.values);
        }
        w.finish(meta)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, ArtifactMeta)> {
        let mut r = Reader::new(bytes, SBWF_MAGIC, "feature file")?;
        let m = r.u32()? as usize;
        let code = r.u8()?;
        let pooling_id = PoolingId::from_code(code)
            .ok_or_else(|| Error::artifact("feature file", format!("bad pooling code {code}")))?;
        let n = r.u64()?;
        let mut rows = Vec::new();
        for _ in 0..n {
            let image_id = r.str()?;
            let label = match r.u32()? {
                0 => None,
                l => Some(l as usize),
            };
            let degenerate = r.u8()? != 0;
            let values = r.f64s(m)?;
            rows.push(ImageFeature {
                values,
                pooling_id,
                image_id,
                label,
                degenerate,
            });
        }
        let meta = r.finish()?;
        Ok((Self::new(m, pooling_id, rows)?, meta))
    }
}
