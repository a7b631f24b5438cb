//! Multiclass probability estimation from binary pi-series: pairwise
//! coupling, baseline learning (B1/B2), baseline-enhanced pairwise (BP)
//! and one-vs-all.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::kernel::{Gram, KernelKind, KernelSpec};
use super::series::{train_pi_series_gram, validate_pi_grid, BinaryWsvmModel, EstimatorRule, PiSeriesModel};
use super::smo::SolverParams;
use crate::artifact::{ArtifactMeta, Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use crate::pooling::{ImageFeature, PoolingId};

const SBWM_MAGIC: &[u8; 4] = b"SBWM";

/// Binary conditionals are clamped to `[Q_EPS, 1 - Q_EPS]` before forming ratios.
pub const Q_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineRule {
    /// Most populous training class.
    B1,
    /// Class whose mean feature is closest in aggregate to the other means.
    B2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Pairwise,
    Baseline(BaselineRule),
    Bp(BaselineRule),
    Ova,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Pairwise,
        Scheme::Baseline(BaselineRule::B1),
        Scheme::Bp(BaselineRule::B1),
        Scheme::Baseline(BaselineRule::B2),
        Scheme::Bp(BaselineRule::B2),
        Scheme::Ova,
    ];

    fn code(self) -> u8 {
        Self::ALL.iter().position(|&s| s == self).unwrap() as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    fn baseline_rule(self) -> Option<BaselineRule> {
        match self {
            Scheme::Baseline(r) | Scheme::Bp(r) => Some(r),
            _ => None,
        }
    }

    /// Whether predictions carry a full pairwise table (enabling max voting).
    pub fn has_table(self) -> bool {
        matches!(self, Scheme::Pairwise | Scheme::Bp(_))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Pairwise => "pairwise",
            Scheme::Baseline(BaselineRule::B1) => "b1",
            Scheme::Baseline(BaselineRule::B2) => "b2",
            Scheme::Bp(BaselineRule::B1) => "bp1",
            Scheme::Bp(BaselineRule::B2) => "bp2",
            Scheme::Ova => "ova",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "pairwise" | "p" => Scheme::Pairwise,
            "b1" | "baseline_b1" => Scheme::Baseline(BaselineRule::B1),
            "b2" | "baseline_b2" => Scheme::Baseline(BaselineRule::B2),
            "bp" | "bp1" | "bp_b1" => Scheme::Bp(BaselineRule::B1),
            "bp2" | "bp_b2" => Scheme::Bp(BaselineRule::B2),
            "ova" | "a" => Scheme::Ova,
            other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
        })
    }
}

impl serde::Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Decision rule turning probabilities into a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Argmax,
    MaxVote,
}

/// A binary component: class `pos` (+1) against class `neg`, or against
/// all other classes when `neg` is `None`. Classes are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentKey {
    pub pos: usize,
    pub neg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub key: ComponentKey,
    pub series: PiSeriesModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WsvmParams {
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub grid: Vec<f64>,
    pub estimator: EstimatorRule,
    pub solver: SolverParams,
}

impl Default for WsvmParams {
    fn default() -> Self {
        Self {
            lambda: 2f64.powi(-6),
            kernel: KernelSpec::rbf(1.0),
            grid: super::series::default_pi_grid(19),
            estimator: EstimatorRule::default(),
            solver: SolverParams::default(),
        }
    }
}

/// Trained multiclass model. Support vectors are stored in the model so it
/// can score new features on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    pub scheme: Scheme,
    pub k: usize,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub estimator: EstimatorRule,
    pub baseline: Option<usize>,
    pub class_counts: Vec<usize>,
    pub pooling_id: Option<PoolingId>,
    /// Content hash of the feature artifact the model was trained on.
    pub feature_hash: String,
    /// Content hash of the codebook behind those features.
    pub codebook_hash: String,
    pub support_rows: Vec<Vec<f64>>,
    /// Training-row index of each stored support vector.
    pub support_index: Vec<usize>,
    /// Identifier of each stored support vector (image id when known).
    pub support_refs: Vec<String>,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityEstimate {
    pub probs: Vec<f64>,
    /// `table[j][l] = q_{j | (j, l)}` (0-based), diagonal 0.5.
    pub table: Option<Vec<Vec<f64>>>,
}

pub fn class_counts(labels: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0; k];
    for &l in labels {
        if l == 0 || l > k {
            return Err(Error::InvalidParameter(format!("label {l} outside 1..={k}")));
        }
        counts[l - 1] += 1;
    }
    Ok(counts)
}

/// Most populous class, smallest index on ties.
pub fn baseline_b1(counts: &[usize]) -> usize {
    let mut best = 0;
    for (j, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = j;
        }
    }
    best + 1
}

/// Class minimizing the summed Euclidean distance from its mean feature to
/// the other class means, smallest index on ties.
pub fn baseline_b2<R: AsRef<[f64]>>(rows: &[R], labels: &[usize], k: usize) -> usize {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let mut means = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l - 1] += 1;
        for (m, v) in means[l - 1].iter_mut().zip(r.as_ref()) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            m.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    let mut best = (f64::INFINITY, 0);
    for a in 0..k {
        let total: f64 = (0..k)
            .filter(|&b| b != a)
            .map(|b| squared_distance(&means[a], &means[b]).sqrt())
            .sum();
        if total < best.0 {
            best = (total, a);
        }
    }
    best.1 + 1
}

fn component_keys(scheme: Scheme, k: usize, baseline: Option<usize>) -> Vec<ComponentKey> {
    match scheme {
        Scheme::Pairwise => (1..=k)
            .flat_map(|a| ((a + 1)..=k).map(move |b| ComponentKey { pos: a, neg: Some(b) }))
            .collect(),
        Scheme::Baseline(_) | Scheme::Bp(_) => {
            let base = baseline.expect("baseline schemes select a class");
            (1..=k)
                .filter(|&j| j != base)
                .map(|j| ComponentKey { pos: j, neg: Some(base) })
                .collect()
        }
        Scheme::Ova => (1..=k).map(|j| ComponentKey { pos: j, neg: None }).collect(),
    }
}

/// Fits every component of `scheme`.
pub fn fit_multiclass<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[usize],
    k: usize,
    scheme: Scheme,
    params: &WsvmParams,
) -> Result<MulticlassModel> {
    let gram = Gram::new(rows, &params.kernel)?;
    fit_multiclass_gram(&gram, rows, labels, k, scheme, params)
}

/// As [`fit_multiclass`] with a precomputed Gram over `rows` under
/// `params.kernel`.
pub fn fit_multiclass_gram<R: AsRef<[f64]> + Sync>(
    gram: &Gram,
    rows: &[R],
    labels: &[usize],
    k: usize,
    scheme: Scheme,
    params: &WsvmParams,
) -> Result<MulticlassModel> {
    if k < 2 {
        return Err(Error::SingleClass);
    }
    if rows.len() != labels.len() || gram.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            found: labels.len().min(gram.len()),
        });
    }
    params.kernel.validate()?;
    validate_pi_grid(&params.grid)?;
    let counts = class_counts(labels, k)?;
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass { class: j + 1 });
    }
    let baseline = match scheme.baseline_rule() {
        Some(BaselineRule::B1) => Some(baseline_b1(&counts)),
        Some(BaselineRule::B2) => Some(baseline_b2(rows, labels, k)),
        None => None,
    };
    let keys = component_keys(scheme, k, baseline);

    let fitted = keys
        .par_iter()
        .map(|&key| {
            let mut idx = Vec::new();
            let mut y = Vec::new();
            for (i, &l) in labels.iter().enumerate() {
                if l == key.pos {
                    idx.push(i);
                    y.push(1i8);
                } else if key.neg.is_none_or(|n| n == l) {
                    idx.push(i);
                    y.push(-1i8);
                }
            }
            let pos = y.iter().filter(|&&v| v > 0).count();
            if pos < 2 || y.len() - pos < 2 {
                return Err(Error::DegeneratePair {
                    component: format!("{key:?}"),
                });
            }
            let sub = gram.subset(&idx);
            let series = train_pi_series_gram(&sub, &y, &params.grid, params.lambda, &params.solver)?;
            Ok((key, idx, series))
        })
        .collect::<Result<Vec<_>>>()?;

    // compact support vectors into a shared store, ordered by training row
    let mut used = vec![false; rows.len()];
    for (_, idx, series) in &fitted {
        for m in &series.models {
            for &s in &m.support {
                used[idx[s]] = true;
            }
        }
    }
    let mut slot = vec![usize::MAX; rows.len()];
    let mut support_index = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            slot[i] = support_index.len();
            support_index.push(i);
        }
    }
    let components = fitted
        .into_iter()
        .map(|(key, idx, mut series)| {
            for m in &mut series.models {
                for s in &mut m.support {
                    *s = slot[idx[*s]];
                }
            }
            Component { key, series }
        })
        .collect();

    Ok(MulticlassModel {
        scheme,
        k,
        kernel: params.kernel,
        lambda: params.lambda,
        grid: params.grid.clone(),
        estimator: params.estimator,
        baseline,
        class_counts: counts,
        pooling_id: None,
        feature_hash: String::new(),
        codebook_hash: String::new(),
        support_rows: support_index.iter().map(|&i| rows[i].as_ref().to_vec()).collect(),
        support_refs: support_index.iter().map(|i| i.to_string()).collect(),
        support_index,
        components,
    })
}

fn clamp_q(q: f64) -> f64 {
    q.clamp(Q_EPS, 1.0 - Q_EPS)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Couples a pairwise table through one anchor class (0-based):
/// `p_j ∝ q_{j|(j,a)} / q_{a|(j,a)}` with `p_a ∝ 1`.
pub fn couple_anchor(table: &[Vec<f64>], anchor: usize) -> Vec<f64> {
    let r = (0..table.len())
        .map(|j| {
            if j == anchor {
                1.0
            } else {
                table[j][anchor] / table[anchor][j]
            }
        })
        .collect();
    normalized(r)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-class median of the anchor couplings over every anchor, renormalized.
pub fn couple_median(table: &[Vec<f64>]) -> Vec<f64> {
    let k = table.len();
    let per_anchor: Vec<Vec<f64>> = (0..k).map(|a| couple_anchor(table, a)).collect();
    normalized(
        (0..k)
            .map(|j| median(&mut per_anchor.iter().map(|p| p[j]).collect::<Vec<_>>()))
            .collect(),
    )
}

/// Probabilities and the implied full pairwise table from baseline ratios.
pub fn reconstruct_from_ratios(r: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = r.len();
    let mut table = vec![vec![0.5; k]; k];
    for j in 0..k {
        for l in (j + 1)..k {
            let q = r[j] / (r[j] + r[l]);
            table[j][l] = q;
            table[l][j] = 1.0 - q;
        }
    }
    (normalized(r.to_vec()), table)
}

/// Pairwise table generated by a distribution: `q_{j|(j,l)} = p_j / (p_j + p_l)`.
pub fn table_from_probs(p: &[f64]) -> Vec<Vec<f64>> {
    reconstruct_from_ratios(p).1
}

impl MulticlassModel {
    pub fn dim(&self) -> usize {
        self.support_rows.first().map_or(0, |r| r.len())
    }

    fn kernel_vector(&self, x: &[f64]) -> Vec<f64> {
        self.support_rows.iter().map(|s| self.kernel.eval(s, x)).collect()
    }

    /// Clamped `P(pos | x)` for every component, in component order.
    pub fn component_estimates(&self, x: &[f64]) -> Vec<f64> {
        let kx = self.kernel_vector(x);
        self.components
            .iter()
            .map(|c| clamp_q(c.series.estimate(&kx, self.estimator)))
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityEstimate> {
        if !self.support_rows.is_empty() && x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let q = self.component_estimates(x);
        let k = self.k;
        Ok(match self.scheme {
            Scheme::Pairwise => {
                let mut table = vec![vec![0.5; k]; k];
                for (c, &qc) in self.components.iter().zip(&q) {
                    let (a, b) = (c.key.pos - 1, c.key.neg.unwrap() - 1);
                    table[a][b] = qc;
                    table[b][a] = 1.0 - qc;
                }
                ProbabilityEstimate {
                    probs: couple_median(&table),
                    table: Some(table),
                }
            }
            Scheme::Baseline(_) | Scheme::Bp(_) => {
                let mut r = vec![1.0; k];
                for (c, &qc) in self.components.iter().zip(&q) {
                    r[c.key.pos - 1] = qc / (1.0 - qc);
                }
                let (probs, table) = reconstruct_from_ratios(&r);
                ProbabilityEstimate {
                    probs,
                    table: matches!(self.scheme, Scheme::Bp(_)).then_some(table),
                }
            }
            Scheme::Ova => ProbabilityEstimate {
                probs: normalized(q),
                table: None,
            },
        })
    }

    /// Scores a feature, refusing one pooled differently from training.
    pub fn predict_feature(&self, f: &ImageFeature) -> Result<ProbabilityEstimate> {
        if let Some(id) = self.pooling_id {
            if id != f.pooling_id {
                return Err(Error::Incompatible(format!(
                    "model trained on {id} features, got {} for '{}'",
                    f.pooling_id, f.image_id
                )));
            }
        }
        self.predict_proba(&f.values)
    }

    pub fn to_bytes(&self, meta: &ArtifactMeta) -> Vec<u8> {
        let mut w = Writer::new(SBWM_MAGIC);
        w.u8(self.scheme.code())
            .u32(self.k as u32)
            .u32(self.baseline.unwrap_or(0) as u32)
            .u8(match self.kernel.kind {
                KernelKind::Rbf => 0,
                KernelKind::Linear => 1,
            })
            .f64(self.kernel.gamma)
            .f64(self.lambda)
            .u8(match self.estimator {
                EstimatorRule::LargestNonNegative => 0,
                EstimatorRule::CountNonNegative => 1,
            })
            .str(&self.pooling_id.map(|p| p.to_string()).unwrap_or_default())
            .str(&self.feature_hash)
            .str(&self.codebook_hash)
            .u32(self.grid.len() as u32)
            .f64s(&self.grid);
        for &c in &self.class_counts {
            w.u64(c as u64);
        }
        w.u64(self.support_rows.len() as u64).u32(self.dim() as u32);
        for ((row, idx), r) in self.support_rows.iter().zip(&self.support_index).zip(&self.support_refs) {
            w.u64(*idx as u64).str(r).f64s(row);
        }
        w.u32(self.components.len() as u32);
        for c in &self.components {
            w.u32(c.key.pos as u32).u32(c.key.neg.unwrap_or(0) as u32);
            for m in &c.series.models {
                w.f64(m.bias)
                    .u64(m.iterations as u64)
                    .f64(m.kkt_gap)
                    .u32(m.support.len() as u32);
                for (&s, &v) in m.support.iter().zip(&m.coef) {
                    w.u32(s as u32).f64(v);
                }
            }
        }
        w.finish(meta)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, ArtifactMeta)> {
        const WHAT: &str = "model file";
        let bad = |reason: &str| Error::artifact(WHAT, reason.to_string());
        let mut r = Reader::new(bytes, SBWM_MAGIC, WHAT)?;
        let scheme = Scheme::from_code(r.u8()?).ok_or_else(|| bad("unknown scheme"))?;
        let k = r.u32()? as usize;
        let baseline = match r.u32()? {
            0 => None,
            b => Some(b as usize),
        };
        let kind = match r.u8()? {
            0 => KernelKind::Rbf,
            1 => KernelKind::Linear,
            _ => return Err(bad("unknown kernel")),
        };
        let kernel = KernelSpec { kind, gamma: r.f64()? };
        let lambda = r.f64()?;
        let estimator = match r.u8()? {
            0 => EstimatorRule::LargestNonNegative,
            1 => EstimatorRule::CountNonNegative,
            _ => return Err(bad("unknown estimator")),
        };
        let pooling = r.str()?;
        let pooling_id = if pooling.is_empty() {
            None
        } else {
            Some(pooling.parse().map_err(|_| bad("unknown pooling id"))?)
        };
        let feature_hash = r.str()?;
        let codebook_hash = r.str()?;
        let g = r.u32()? as usize;
        let grid = r.f64s(g)?;
        let class_counts = (0..k).map(|_| r.u64().map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
        let n_sv = r.u64()? as usize;
        let dim = r.u32()? as usize;
        let mut support_rows = Vec::new();
        let mut support_index = Vec::new();
        let mut support_refs = Vec::new();
        for _ in 0..n_sv {
            support_index.push(r.u64()? as usize);
            support_refs.push(r.str()?);
            support_rows.push(r.f64s(dim)?);
        }
        let n_comp = r.u32()? as usize;
        let mut components = Vec::new();
        for _ in 0..n_comp {
            let pos = r.u32()? as usize;
            let neg = match r.u32()? {
                0 => None,
                v => Some(v as usize),
            };
            let mut models = Vec::new();
            for &pi in &grid {
                let bias = r.f64()?;
                let iterations = r.u64()? as usize;
                let kkt_gap = r.f64()?;
                let ns = r.u32()? as usize;
                let mut support = Vec::with_capacity(ns);
                let mut coef = Vec::with_capacity(ns);
                for _ in 0..ns {
                    let s = r.u32()? as usize;
                    if s >= n_sv {
                        return Err(bad("support index out of range"));
                    }
                    support.push(s);
                    coef.push(r.f64()?);
                }
                models.push(BinaryWsvmModel {
                    pi,
                    lambda,
                    bias,
                    support,
                    coef,
                    iterations,
                    kkt_gap,
                });
            }
            components.push(Component {
                key: ComponentKey { pos, neg },
                series: PiSeriesModel { pis: grid.clone(), models },
            });
        }
        let meta = r.finish()?;
        Ok((
            Self {
                scheme,
                k,
                kernel,
                lambda,
                grid,
                estimator,
                baseline,
                class_counts,
                pooling_id,
                feature_hash,
                codebook_hash,
                support_rows,
                support_index,
                support_refs,
                components,
            },
            meta,
        ))
    }
}

/// Picks a 1-based label. Max voting gives one vote per pairwise win and
/// half a vote to each side of an exact 0.5; vote ties fall back to argmax.
pub fn classify(est: &ProbabilityEstimate, rule: Rule) -> Result<usize> {
    let argmax_among = |cands: &[usize]| {
        let mut best = cands[0];
        for &j in cands {
            if est.probs[j] > est.probs[best] {
                best = j;
            }
        }
        best + 1
    };
    let k = est.probs.len();
    match rule {
        Rule::Argmax => Ok(argmax_among(&(0..k).collect::<Vec<_>>())),
        Rule::MaxVote => {
            let table = est.table.as_ref().ok_or(Error::MissingPairwiseTable)?;
            let mut votes = vec![0.0; k];
            for j in 0..k {
                for l in 0..k {
                    if j == l {
                        continue;
                    }
                    let q = table[j][l];
                    if q > 0.5 {
                        votes[j] += 1.0;
                    } else if q == 0.5 {
                        votes[j] += 0.5;
                    }
                }
            }
            let top = votes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let tied: Vec<usize> = (0..k).filter(|&j| votes[j] == top).collect();
            Ok(argmax_among(&tied))
        }
    }
}
