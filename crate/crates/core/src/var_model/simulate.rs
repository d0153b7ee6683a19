use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::panel::TimeSeriesPanel;
use super::params::VarParams;
use super::scenario::AnomalyScenario;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const DEFAULT_BURN_IN: usize = 200;

/// Simulates `len` observations of a stationary VAR(q) started from zero,
/// discarding the first `burn_in` draws.
pub fn simulate(params: &VarParams, len: usize, burn_in: usize, seed: u64) -> Result<TimeSeriesPanel> {
    if len == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    run_recursion(
        params.dim(),
        params.order(),
        params.noise_cov(),
        len,
        burn_in,
        seed,
        |_| params,
    )
}

/// Simulates the piecewise-constant process of `scenario`. Burn-in uses the
/// baseline law.
pub fn simulate_with_anomaly(scenario: &AnomalyScenario, seed: u64) -> Result<TimeSeriesPanel> {
    let base = scenario.base();
    run_recursion(
        base.dim(),
        base.order(),
        base.noise_cov(),
        scenario.horizon(),
        scenario.burn_in(),
        seed,
        |t| scenario.law_at(t),
    )
}

fn run_recursion<'a>(
    p: usize,
    q: usize,
    noise_cov: &DMatrix<f64>,
    len: usize,
    burn_in: usize,
    seed: u64,
    law_at: impl Fn(isize) -> &'a VarParams,
) -> Result<TimeSeriesPanel> {
    let chol = noise_cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RejectedParameters("noise covariance is not positive definite".into()))?;
    let lower = chol.l();
    let mut rng = rng_from_seed(seed);

    // history[k] holds x_{t-1-k}
    let mut history: Vec<Vec<f64>> = vec![vec![0.0; p]; q];
    let mut out = Vec::with_capacity(len * p);
    let mut z = vec![0.0; p];
    let mut x = vec![0.0; p];
    let first = 1 - burn_in as isize;
    for t in first..=len as isize {
        let law = law_at(t);
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..p {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += lower[(i, j)] * zj;
            }
            for (a, lag) in law.coeffs().iter().zip(&history) {
                for (j, v) in lag.iter().enumerate() {
                    acc += a[(i, j)] * v;
                }
            }
            x[i] = acc;
        }
        history.rotate_right(1);
        history[0].copy_from_slice(&x);
        if t >= 1 {
            out.extend_from_slice(&x);
        }
    }
    TimeSeriesPanel::from_row_major(out, len, p)
}
