//! Weighted kernel SVMs over a grid of class weights, the bracketing
//! probability estimator and multiclass probability schemes.

mod kernel;
mod multiclass;
mod series;
mod smo;
mod tune;

pub use kernel::{
    default_gamma_grid, default_lambda_grid, kernel_matrix, Gram, KernelKind, KernelSpec,
    SquaredDistances,
};
pub use multiclass::{
    baseline_b1, baseline_b2, class_counts, classify, couple_anchor, couple_median, fit_multiclass,
    fit_multiclass_gram, reconstruct_from_ratios, table_from_probs, BaselineRule, Component,
    ComponentKey, MulticlassModel, ProbabilityEstimate, Rule, Scheme, WsvmParams, Q_EPS,
};
pub use series::{
    box_bound, default_pi_grid, estimate_from_decisions, train_binary_gram, train_binary_wsvm,
    train_pi_series, train_pi_series_gram, validate_pi_grid, BinaryWsvmModel, EstimatorRule,
    PiSeriesModel,
};
pub use smo::SolverParams;
pub use tune::{egkl, nll, tune_egkl, TunePoint, TuneReport, PROB_FLOOR};
