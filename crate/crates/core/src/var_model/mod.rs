//! VAR(q) processes with piecewise-constant coefficients: laws, simulation,
//! fixtures and the interval regression view used by all test statistics.

mod generate;
mod panel;
mod params;
mod scenario;
mod simulate;
mod view;

pub use generate::{
    bump_smallest_positive, generate_dense_stationary, generate_dense_with_radius, generate_sparse_offdiag,
    DEFAULT_TARGET_RADIUS,
};
pub use panel::TimeSeriesPanel;
pub use params::VarParams;
pub use scenario::{AnomalyScenario, Episode};
pub use simulate::{simulate, simulate_with_anomaly, DEFAULT_BURN_IN};
pub use view::{build_regression_view, RegressionView};

pub(crate) use view::{fill_lag_row, fill_residual};
