//! SMO solver for the box-constrained SVM dual
//!
//! ```text
//! min_a  1/2 a^T Q a - 1^T a   s.t.  y^T a = 0,  0 <= a_i <= C_i
//! ```
//!
//! with `Q_ij = y_i y_j K_ij`, second-order working-set selection and
//! per-point upper bounds.

use serde::{Deserialize, Serialize};

use super::kernel::Gram;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    /// Offset `b` of `f(x) = sum a_i y_i K(x_i, x) + b`.
    pub bias: f64,
    pub iterations: usize,
    pub gap: f64,
}

fn is_upper(a: f64, c: f64) -> bool {
    a >= c
}

fn is_lower(a: f64) -> bool {
    a <= 0.0
}

/// `y` entries must be +1 or -1 and `c` entries positive.
pub(crate) fn solve(gram: &Gram, y: &[f64], c: &[f64], params: &SolverParams) -> Result<DualSolution> {
    let n = y.len();
    debug_assert_eq!(gram.len(), n);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let qd: Vec<f64> = (0..n).map(|i| gram.at(i, i)).collect();
    let mut iterations = 0;
    let mut gap;

    loop {
        // i: maximal violator from the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 {
                !is_upper(alpha[t], c[t])
            } else {
                !is_lower(alpha[t])
            };
            if in_up && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        let ki = if i_sel != usize::MAX {
            Some(gram.row(i_sel))
        } else {
            None
        };
        for t in 0..n {
            let in_low = if y[t] > 0.0 {
                !is_lower(alpha[t])
            } else {
                !is_upper(alpha[t], c[t])
            };
            if !in_low {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if let Some(ki) = ki {
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = qd[i_sel] + qd[t] - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        gap = gmax - gmin;
        if !(gap >= params.tol) || j_sel == usize::MAX {
            if !gap.is_finite() {
                gap = 0.0;
            }
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                violation: gap,
            });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (ci, cj) = (c[i], c[j]);
        let kij = gram.at(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        let (ri, rj) = (gram.row(i), gram.row(j));
        for k in 0..n {
            grad[k] += y[k] * (ri[k] * di + rj[k] * dj);
        }
    }

    Ok(DualSolution {
        bias: -rho(&alpha, &grad, y, c),
        alpha,
        iterations,
        gap,
    })
}

fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: &[f64]) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t], c[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum += yg;
            free += 1;
        }
    }
    if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    }
}

#[cfg(test)]
/// Dual objective `1/2 a^T Q a - 1^T a`.
pub(crate) fn dual_objective(gram: &Gram, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = gram.row(i);
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * row[j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}
