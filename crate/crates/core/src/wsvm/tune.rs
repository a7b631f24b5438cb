//! Grid selection of `(lambda, gamma)` by held-out negative log-likelihood
//! (the EGKL criterion) on a stratified 50/50 train/tune split.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Gram, KernelKind, KernelSpec, SquaredDistances};
use super::multiclass::{fit_multiclass_gram, MulticlassModel, Scheme, WsvmParams};
use crate::error::{Error, Result};
use crate::split::stratified_split;

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunePoint {
    pub lambda: f64,
    pub gamma: f64,
    /// `None` when fitting failed at this grid point.
    pub egkl: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub lambda: f64,
    pub gamma: f64,
    pub egkl: f64,
    pub n_train: usize,
    pub n_tune: usize,
    pub points: Vec<TunePoint>,
}

/// `-(1/n) sum log p_{y_i}` over per-row class probabilities, floored at
/// [`PROB_FLOOR`].
pub fn nll<P: AsRef<[f64]>>(probs: &[P], labels: &[usize]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &l)| -p.as_ref()[l - 1].max(PROB_FLOOR).ln())
        .sum();
    total / probs.len() as f64
}

/// Held-out EGKL of a fitted model.
pub fn egkl<R: AsRef<[f64]>>(model: &MulticlassModel, rows: &[R], labels: &[usize]) -> Result<f64> {
    let probs = rows
        .iter()
        .map(|r| model.predict_proba(r.as_ref()).map(|e| e.probs))
        .collect::<Result<Vec<_>>>()?;
    Ok(nll(&probs, labels))
}

/// Evaluates every `(lambda, gamma)` pair and returns the minimizer, ties
/// going to the smaller lambda and then the smaller gamma. For a linear
/// kernel `gammas` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn tune_egkl<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[usize],
    k: usize,
    scheme: Scheme,
    base: &WsvmParams,
    lambdas: &[f64],
    gammas: &[f64],
    split_seed: u64,
) -> Result<TuneReport> {
    let linear = base.kernel.kind == KernelKind::Linear;
    let gammas: Vec<f64> = if linear { vec![0.0] } else { gammas.to_vec() };
    if lambdas.is_empty() || gammas.is_empty() {
        return Err(Error::InvalidParameter("tuning grids must be non-empty".into()));
    }
    let split = stratified_split(labels, k, 0.5, split_seed)?;
    let pick = |idx: &[usize]| -> (Vec<&[f64]>, Vec<usize>) {
        idx.iter().map(|&i| (rows[i].as_ref(), labels[i])).unzip()
    };
    let (train_x, train_y) = pick(&split.train);
    let (tune_x, tune_y) = pick(&split.test);

    let d2 = (!linear).then(|| SquaredDistances::new(&train_x));
    let grams: Vec<Gram> = gammas
        .par_iter()
        .map(|&g| match &d2 {
            Some(d2) => Ok(Gram::from_squared_distances(d2, g)),
            None => Gram::new(&train_x, &KernelSpec::linear()),
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|li| (0..gammas.len()).map(move |gi| (li, gi)))
        .collect();
    let points: Vec<TunePoint> = jobs
        .par_iter()
        .map(|&(li, gi)| {
            let params = WsvmParams {
                lambda: lambdas[li],
                kernel: if linear {
                    KernelSpec::linear()
                } else {
                    KernelSpec::rbf(gammas[gi])
                },
                ..base.clone()
            };
            let outcome = fit_multiclass_gram(&grams[gi], &train_x, &train_y, k, scheme, &params)
                .and_then(|m| egkl(&m, &tune_x, &tune_y));
            let (egkl, error) = match outcome {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TunePoint {
                lambda: lambdas[li],
                gamma: gammas[gi],
                egkl,
                error,
            }
        })
        .collect();

    let mut best: Option<&TunePoint> = None;
    for p in &points {
        let Some(v) = p.egkl else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bv = b.egkl.unwrap();
                v < bv
                    || (v == bv && (p.lambda < b.lambda || (p.lambda == b.lambda && p.gamma < b.gamma)))
            }
        };
        if better {
            best = Some(p);
        }
    }
    let best = best.ok_or(Error::AllGridPointsDegenerate)?;
    Ok(TuneReport {
        lambda: best.lambda,
        gamma: best.gamma,
        egkl: best.egkl.unwrap(),
        n_train: train_x.len(),
        n_tune: tune_x.len(),
        points: points.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_classes;
    use crate::wsvm::default_pi_grid;

    fn data() -> (Vec<Vec<f64>>, Vec<usize>) {
        gaussian_classes(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]], 1.0, 20, 2)
    }

    fn base() -> WsvmParams {
        WsvmParams {
            grid: default_pi_grid(9),
            ..Default::default()
        }
    }

    #[test]
    fn single_point_grid() {
        let (x, y) = data();
        let r = tune_egkl(&x, &y, 3, Scheme::Ova, &base(), &[0.01], &[0.5], 1).unwrap();
        assert_eq!((r.lambda, r.gamma), (0.01, 0.5));
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.egkl, r.points[0].egkl.unwrap());
        assert_eq!(r.n_train + r.n_tune, 60);
    }

    #[test]
    fn selects_grid_minimum_and_is_reproducible() {
        let (x, y) = data();
        let lambdas = [0.001, 0.01, 0.1];
        let gammas = [0.1, 0.5, 2.0];
        let r = tune_egkl(&x, &y, 3, Scheme::Pairwise, &base(), &lambdas, &gammas, 4).unwrap();
        let min = r.points.iter().filter_map(|p| p.egkl).fold(f64::INFINITY, f64::min);
        assert_eq!(r.egkl, min);
        assert_eq!(r, tune_egkl(&x, &y, 3, Scheme::Pairwise, &base(), &lambdas, &gammas, 4).unwrap());
    }

    #[test]
    fn ties_prefer_smaller_lambda_then_gamma() {
        // far-apart classes: every grid point predicts the truth with the
        // same top bracket, so all EGKL values coincide
        let (x, y) = gaussian_classes(&[vec![0.0], vec![100.0]], 0.1, 10, 3);
        let r = tune_egkl(&x, &y, 2, Scheme::Pairwise, &base(), &[0.01, 0.001], &[1.0, 0.5], 0).unwrap();
        let vals: Vec<f64> = r.points.iter().map(|p| p.egkl.unwrap()).collect();
        assert!(vals.iter().all(|&v| v == vals[0]), "{vals:?}");
        assert_eq!((r.lambda, r.gamma), (0.001, 0.5));
    }

    #[test]
    fn all_degenerate_points_error() {
        let (x, y) = data();
        let bad = WsvmParams {
            solver: crate::wsvm::SolverParams { tol: 1e-12, max_iter: 1 },
            ..base()
        };
        assert!(matches!(
            tune_egkl(&x, &y, 3, Scheme::Ova, &bad, &[0.01], &[0.5], 0),
            Err(Error::AllGridPointsDegenerate)
        ));
    }

    #[test]
    fn nll_bounds() {
        let certain = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(nll(&certain, &[1, 2]), 0.0);
        let wrong = nll(&certain, &[2, 1]);
        assert!((wrong + PROB_FLOOR.ln()).abs() < 1e-12);
    }
}
