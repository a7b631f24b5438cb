//! Binary weighted SVMs and the pi-grid probability estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Gram, KernelSpec};
use super::smo::{self, SolverParams};
use crate::error::{Error, Result};

/// Trained weighted SVM at one pi.
///
/// `support` indexes the rows the model was trained on (or a support store);
/// `f(x) = sum_s coef_s K(row_support_s, x) + bias` with `coef = alpha * y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryWsvmModel {
    pub pi: f64,
    pub lambda: f64,
    pub bias: f64,
    pub support: Vec<usize>,
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub kkt_gap: f64,
}

impl BinaryWsvmModel {
    /// Decision value from kernel evaluations `kx[s] = K(row_s, x)`.
    pub fn decision(&self, kx: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&s, &c)| c * kx[s])
            .sum::<f64>()
            + self.bias
    }
}

/// Upper bound on `alpha_i`: the class weight over `n * lambda`.
pub fn box_bound(pi: f64, lambda: f64, n: usize, positive: bool) -> f64 {
    let w = if positive { 1.0 - pi } else { pi };
    w / (n as f64 * lambda)
}

fn check_labels(y: &[i8]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::TooFewRows {
            rows: y.len(),
            requested: 2,
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::InvalidParameter(format!("binary label {bad} is not +1 or -1")));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

fn check_pi_lambda(pi: f64, lambda: f64) -> Result<()> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidParameter(format!("pi must lie in (0, 1), got {pi}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Trains on a precomputed Gram over the training rows.
pub fn train_binary_gram(
    gram: &Gram,
    y: &[i8],
    pi: f64,
    lambda: f64,
    solver: &SolverParams,
) -> Result<BinaryWsvmModel> {
    check_labels(y)?;
    check_pi_lambda(pi, lambda)?;
    if gram.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: gram.len(),
            found: y.len(),
        });
    }
    let n = y.len();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let c: Vec<f64> = y.iter().map(|&v| box_bound(pi, lambda, n, v > 0)).collect();
    let sol = smo::solve(gram, &yf, &c, solver)?;
    let (support, coef) = sol
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, &a)| (i, a * yf[i]))
        .unzip();
    Ok(BinaryWsvmModel {
        pi,
        lambda,
        bias: sol.bias,
        support,
        coef,
        iterations: sol.iterations,
        kkt_gap: sol.gap,
    })
}

pub fn train_binary_wsvm<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[i8],
    pi: f64,
    lambda: f64,
    kernel: &KernelSpec,
) -> Result<BinaryWsvmModel> {
    let gram = Gram::new(rows, kernel)?;
    train_binary_gram(&gram, y, pi, lambda, &SolverParams::default())
}

/// How the pi index `m*` is read off a sign sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorRule {
    /// Largest `m` with `f_m(x) >= 0`.
    #[default]
    LargestNonNegative,
    /// Number of `m` with `f_m(x) >= 0`.
    CountNonNegative,
}

/// `pi_m = m / (size + 1)` for `m = 1..=size`.
pub fn default_pi_grid(size: usize) -> Vec<f64> {
    (1..=size).map(|m| m as f64 / (size + 1) as f64).collect()
}

pub fn validate_pi_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("pi grid is empty".into()));
    }
    if grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "pi grid must be strictly increasing inside (0, 1)".into(),
        ));
    }
    Ok(())
}

/// Midpoint of the bracket `(pi_{m*}, pi_{m*+1})` with `pi_0 = 0` and
/// `pi_{len+1} = 1`.
pub fn estimate_from_decisions(pis: &[f64], decisions: &[f64], rule: EstimatorRule) -> f64 {
    let m_star = match rule {
        EstimatorRule::LargestNonNegative => decisions
            .iter()
            .rposition(|&f| f >= 0.0)
            .map_or(0, |m| m + 1),
        EstimatorRule::CountNonNegative => decisions.iter().filter(|&&f| f >= 0.0).count(),
    };
    let lo = if m_star == 0 { 0.0 } else { pis[m_star - 1] };
    let hi = if m_star == pis.len() { 1.0 } else { pis[m_star] };
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiSeriesModel {
    pub pis: Vec<f64>,
    pub models: Vec<BinaryWsvmModel>,
}

impl PiSeriesModel {
    pub fn decisions(&self, kx: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.decision(kx)).collect()
    }

    /// Estimated `P(y = +1 | x)`.
    pub fn estimate(&self, kx: &[f64], rule: EstimatorRule) -> f64 {
        estimate_from_decisions(&self.pis, &self.decisions(kx), rule)
    }
}

/// One model per grid point, all sharing `gram`.
pub fn train_pi_series_gram(
    gram: &Gram,
    y: &[i8],
    grid: &[f64],
    lambda: f64,
    solver: &SolverParams,
) -> Result<PiSeriesModel> {
    validate_pi_grid(grid)?;
    let models = grid
        .par_iter()
        .map(|&pi| train_binary_gram(gram, y, pi, lambda, solver))
        .collect::<Result<Vec<_>>>()?;
    Ok(PiSeriesModel {
        pis: grid.to_vec(),
        models,
    })
}

pub fn train_pi_series<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[i8],
    grid: &[f64],
    lambda: f64,
    kernel: &KernelSpec,
) -> Result<PiSeriesModel> {
    let gram = Gram::new(rows, kernel)?;
    train_pi_series_gram(&gram, y, grid, lambda, &SolverParams::default())
}
