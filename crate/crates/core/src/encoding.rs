//! Descriptor-to-visual-code encoders: hard vector quantization, full
//! locality-constrained linear coding (LLC) and its k-nearest approximation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{nearest, Codebook};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, squared_distance};
use crate::sift::DescriptorSet;

/// LLC weights below this magnitude are dropped from the sparse code.
const SPARSE_EPS: f64 = 1e-12;

/// Sparse M-dimensional code with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualCode {
    indices: Vec<usize>,
    weights: Vec<f64>,
    m: usize,
}

impl VisualCode {
    fn one_hot(j: usize, m: usize) -> Self {
        Self {
            indices: vec![j],
            weights: vec![1.0],
            m,
        }
    }

    /// Builds a code from `(index, weight)` pairs, dropping near-zero weights
    /// and rescaling the survivors to sum to one.
    pub(crate) fn from_pairs(mut pairs: Vec<(usize, f64)>, m: usize) -> Self {
        pairs.retain(|(_, w)| w.abs() >= SPARSE_EPS);
        pairs.sort_by_key(|p| p.0);
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let (indices, weights) = pairs.into_iter().map(|(j, w)| (j, w / total)).unzip();
        Self {
            indices,
            weights,
            m,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (&j, &w) in self.indices.iter().zip(&self.weights) {
            out[j] = w;
        }
        out
    }

    /// `B^T c`, the descriptor reconstructed from the code.
    pub fn reconstruct(&self, codebook: &Codebook) -> Vec<f64> {
        let mut out = vec![0.0; codebook.dim()];
        for (&j, &w) in self.indices.iter().zip(&self.weights) {
            for (o, b) in out.iter_mut().zip(codebook.centroid(j)) {
                *o += w * b;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeMatrix {
    pub codes: Vec<VisualCode>,
    pub m: usize,
}

impl CodeMatrix {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// `row,index,weight` triplets for debugging.
    pub fn to_csv_triplets(&self) -> String {
        let mut out = String::from("row,index,weight\n");
        for (r, code) in self.codes.iter().enumerate() {
            for (j, w) in code.indices.iter().zip(&code.weights) {
                out.push_str(&format!("{r},{j},{w}\n"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlcParams {
    /// Weight of the locality penalty.
    pub lambda: f64,
    /// Bandwidth of the locality adaptor.
    pub sigma: f64,
    /// Neighbourhood size for the fast approximation.
    pub knn: usize,
    /// Ridge added to the local Gram system, relative to its trace.
    pub ridge_eps: f64,
}

impl Default for LlcParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            sigma: 1.0,
            knn: 5,
            ridge_eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Encoder {
    #[default]
    Vq,
    Llc,
    FastLlc,
}

impl Encoder {
    pub fn is_vq(self) -> bool {
        matches!(self, Encoder::Vq)
    }
}

fn check_dim(x: &[f64], codebook: &Codebook) -> Result<()> {
    if x.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// One-hot code at the nearest centroid (smallest index on ties).
pub fn encode_vq(x: &[f64], codebook: &Codebook) -> Result<VisualCode> {
    check_dim(x, codebook)?;
    let (j, _) = nearest(x, codebook.centroids(), codebook.dim());
    Ok(VisualCode::one_hot(j, codebook.size()))
}

/// Exact LLC code over the whole codebook.
///
/// Minimizes `||x - B^T c||^2 + lambda * ||d ⊙ c||^2` subject to `1^T c = 1`,
/// where `d_j = exp((r_j - max r) / sigma)` and `r_j = ||x - b_j||`. The
/// max-shift keeps `d` in `(0, 1]`; nearer bases get smaller penalties.
pub fn encode_llc(x: &[f64], codebook: &Codebook, p: &LlcParams) -> Result<VisualCode> {
    check_dim(x, codebook)?;
    if !(p.lambda > 0.0 && p.sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "LLC lambda and sigma must be positive".into(),
        ));
    }
    let m = codebook.size();
    if m == 1 {
        return Ok(VisualCode::one_hot(0, 1));
    }
    let dist: Vec<f64> = (0..m)
        .map(|j| squared_distance(x, codebook.centroid(j)).sqrt())
        .collect();
    let rmax = dist.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let centered: Vec<Vec<f64>> = (0..m)
        .map(|j| codebook.centroid(j).iter().zip(x).map(|(b, v)| b - v).collect())
        .collect();
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let g: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            gram[i * m + j] = g;
            gram[j * m + i] = g;
        }
    }
    for (j, r) in dist.iter().enumerate() {
        let d = ((r - rmax) / p.sigma).exp();
        gram[j * m + j] += p.lambda * d * d;
    }
    let w = cholesky_solve(&gram, &vec![1.0; m], m).ok_or(Error::SingularSystem)?;
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total != 0.0) {
        return Err(Error::SingularSystem);
    }
    Ok(VisualCode::from_pairs(
        w.into_iter().enumerate().map(|(j, v)| (j, v / total)).collect(),
        m,
    ))
}

/// Indices of the `k` nearest centroids, ordered by distance then index.
pub fn nearest_k(x: &[f64], codebook: &Codebook, k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = (0..codebook.size())
        .map(|j| (squared_distance(x, codebook.centroid(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < all.len() {
        all.select_nth_unstable_by(k, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all.into_iter().map(|p| p.1).collect()
}

/// Approximate LLC: constrained least squares over the `knn` nearest
/// centroids, remaining entries zero.
pub fn encode_fast_llc(x: &[f64], codebook: &Codebook, p: &LlcParams) -> Result<VisualCode> {
    check_dim(x, codebook)?;
    let m = codebook.size();
    if p.knn == 0 || p.knn > m {
        return Err(Error::InvalidParameter(format!(
            "knn must be in 1..={m}, got {}",
            p.knn
        )));
    }
    if !(p.ridge_eps >= 0.0) {
        return Err(Error::InvalidParameter("ridge_eps must be non-negative".into()));
    }
    let near = nearest_k(x, codebook, p.knn);
    let k = near.len();
    let local: Vec<Vec<f64>> = near
        .iter()
        .map(|&j| codebook.centroid(j).iter().zip(x).map(|(b, v)| b - v).collect())
        .collect();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let g: f64 = local[i].iter().zip(&local[j]).map(|(a, b)| a * b).sum();
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
    }
    let trace: f64 = (0..k).map(|i| gram[i * k + i]).sum();
    let w = if trace == 0.0 {
        // every neighbour coincides with x
        vec![1.0; k]
    } else {
        for i in 0..k {
            gram[i * k + i] += p.ridge_eps * trace;
        }
        cholesky_solve(&gram, &vec![1.0; k], k).ok_or(Error::SingularSystem)?
    };
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total != 0.0) {
        return Err(Error::SingularSystem);
    }
    Ok(VisualCode::from_pairs(
        near.into_iter().zip(w).map(|(j, v)| (j, v / total)).collect(),
        m,
    ))
}

pub fn encode_one(x: &[f64], codebook: &Codebook, method: Encoder, p: &LlcParams) -> Result<VisualCode> {
    match method {
        Encoder::Vq => encode_vq(x, codebook),
        Encoder::Llc => encode_llc(x, codebook, p),
        Encoder::FastLlc => encode_fast_llc(x, codebook, p),
    }
}

/// Encodes every descriptor of an image, preserving order.
pub fn encode_image(
    set: &DescriptorSet,
    codebook: &Codebook,
    method: Encoder,
    p: &LlcParams,
) -> Result<CodeMatrix> {
    let codes = set
        .descriptors
        .par_iter()
        .map(|d| encode_one(d.as_slice(), codebook, method, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(CodeMatrix {
        codes,
        m: codebook.size(),
    })
}
