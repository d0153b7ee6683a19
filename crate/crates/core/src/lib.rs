//! Detection of collective anomalies (epidemic changes) in the coefficient
//! matrices of high-dimensional VAR(q) processes.
//!
//! Candidate intervals are scored with OLS or lasso statistics measuring how
//! much the residuals of a baseline law can be explained by a change
//! `Θ = A⁽²⁾ − A⁽¹⁾` on that interval. Thresholds come from Monte-Carlo
//! calibration under the null.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod experiments;
pub mod intervals;
mod linalg;
pub mod rng;
pub mod test_stats;
pub mod var_model;

pub use detection::{
    calibrate_online_threshold, calibrate_threshold, detect_multiple, detect_online, detect_single, online_windows,
    CalibrationResult, DetectionResult, NullLaw, OnlineAlarm, OnlineConfig, OnlineDetector,
};
pub use error::{Error, Result};
pub use estimation::{estimate_baseline, estimate_noise_covariance, Penalty, PenaltyKind, SolverOptions};
pub use evaluation::{count_distribution, empirical_power, hausdorff_distance, ScenarioOutcome};
pub use intervals::{random_intervals, seeded_intervals, Domain, Interval, IntervalSet, Provenance};
pub use test_stats::{
    default_lambda, lasso_statistic, ols_statistic, scan_intervals, whiten, IntervalStatistic, LambdaScale, Method,
    SigmaMode, StatConfig,
};
pub use var_model::{
    build_regression_view, simulate, simulate_with_anomaly, AnomalyScenario, RegressionView, TimeSeriesPanel, VarParams,
};
