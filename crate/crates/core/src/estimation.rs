//! Penalised and unpenalised least squares, VAR baseline estimation and
//! residual noise-covariance estimation.
//!
//! The lasso objective is `‖y − Xβ‖²₂ + λ‖β‖₁` with no sample-size scaling, so
//! the coordinate update soft-thresholds at `λ/2`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::var_model::{fill_lag_row, fill_residual, TimeSeriesPanel};

const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on the largest absolute coefficient change in a sweep.
    pub tolerance: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 10_000,
            warm_start: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("solver tolerance must be >= 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub coefficients: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_dims(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "design has {} rows but response has length {}",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty {lambda} must be finite and >= 0"
        )));
    }
    Ok(())
}

pub fn lasso_objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    (y - x * beta).norm_squared() + lambda * beta.lp_norm(1)
}

/// Lasso by cyclic coordinate descent on the residual.
pub fn lasso_solve(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    lasso_solve_traced(x, y, lambda, opts, |_| {})
}

/// As [`lasso_solve`], reporting the objective after every sweep.
pub fn lasso_solve_traced(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    opts: &SolverOptions,
    mut on_sweep: impl FnMut(f64),
) -> Result<FitResult> {
    check_dims(x, y)?;
    check_lambda(lambda)?;
    opts.validate()?;
    let m = x.ncols();
    let mut beta = match &opts.warm_start {
        Some(w) if w.len() == m => DVector::from_column_slice(w),
        Some(w) => {
            return Err(Error::InvalidParameter(format!(
                "warm start has length {}, expected {m}",
                w.len()
            )))
        }
        None => DVector::zeros(m),
    };
    let col_sq: Vec<f64> = (0..m).map(|j| x.column(j).norm_squared()).collect();
    let mut resid = y - x * &beta;
    let half = lambda / 2.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut max_delta = 0.0f64;
        for j in 0..m {
            if col_sq[j] <= 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let col = x.column(j);
            let z = col.dot(&resid) + col_sq[j] * beta[j];
            let new = soft_threshold(z, half) / col_sq[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        on_sweep(resid.norm_squared() + lambda * beta.lp_norm(1));
        if max_delta <= opts.tolerance {
            converged = true;
            break;
        }
    }
    let objective = lasso_objective(x, y, &beta, lambda);
    Ok(FitResult {
        coefficients: beta,
        objective,
        iterations,
        converged,
    })
}

/// Coordinate descent on `βᵀGβ − 2cᵀβ + λ‖β‖₁` given a Gram matrix.
///
/// `beta` holds the start point on entry and the solution on exit. Returns
/// `(sweeps, converged)`.
pub(crate) fn lasso_gram(
    gram: &DMatrix<f64>,
    c: &[f64],
    lambda: f64,
    opts: &SolverOptions,
    beta: &mut [f64],
) -> (usize, bool) {
    let m = c.len();
    let half = lambda / 2.0;
    // r = c − Gβ
    let mut r: Vec<f64> = (0..m)
        .map(|j| c[j] - (0..m).map(|k| gram[(j, k)] * beta[k]).sum::<f64>())
        .collect();
    let mut sweeps = 0;
    while sweeps < opts.max_iterations {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..m {
            let gjj = gram[(j, j)];
            if gjj <= 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let new = soft_threshold(r[j] + gjj * beta[j], half) / gjj;
            let delta = new - beta[j];
            if delta != 0.0 {
                let col = gram.column(j);
                for (rk, gk) in r.iter_mut().zip(col.iter()) {
                    *rk -= gk * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta <= opts.tolerance {
            return (sweeps, true);
        }
    }
    (sweeps, false)
}

/// Ordinary least squares via SVD; rejects `n < m` and numerically
/// rank-deficient designs.
pub fn ols_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    check_dims(x, y)?;
    let (n, m) = x.shape();
    if n < m {
        return Err(Error::IllPosedDesign(format!("{n} observations for {m} unknowns")));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::IllPosedDesign(format!(
            "design is rank deficient (singular values {smin:e} / {smax:e})"
        )));
    }
    let beta = svd.solve(y, 0.0).map_err(|e| Error::IllPosedDesign(e.to_string()))?;
    let objective = (y - x * &beta).norm_squared();
    Ok(FitResult {
        coefficients: beta,
        objective,
        iterations: 1,
        converged: true,
    })
}

/// Ridge regression `‖y − Xβ‖²₂ + λ‖β‖²₂`, `λ > 0`.
pub fn ridge_solve(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    check_dims(x, y)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge penalty {lambda} must be > 0")));
    }
    let m = x.ncols();
    let a = x.transpose() * x + DMatrix::identity(m, m) * lambda;
    let b = x.transpose() * y;
    let beta = a
        .cholesky()
        .ok_or_else(|| Error::IllPosedDesign("ridge system not positive definite".into()))?
        .solve(&b);
    let objective = (y - x * &beta).norm_squared() + lambda * beta.norm_squared();
    Ok(FitResult {
        coefficients: beta,
        objective,
        iterations: 1,
        converged: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "snake_case")]
pub enum Penalty {
    Lasso(f64),
    Ridge(f64),
    None,
}

/// Penalty family with λ left to the default rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Lasso,
    Ridge,
    None,
}

impl PenaltyKind {
    /// Resolves λ as `C·√(T_train·(2 ln p + ln T_train))`.
    pub fn resolve(self, train_len: usize, p: usize, constant: f64) -> Penalty {
        let lambda = constant * (train_len as f64 * (2.0 * (p as f64).ln() + (train_len as f64).ln())).sqrt();
        match self {
            PenaltyKind::Lasso => Penalty::Lasso(lambda),
            PenaltyKind::Ridge => Penalty::Ridge(lambda.max(f64::MIN_POSITIVE)),
            PenaltyKind::None => Penalty::None,
        }
    }
}

fn lagged_design(panel: &TimeSeriesPanel, order: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = panel.dim();
    let m = p * order;
    let n = panel.len() - order;
    let mut z = DMatrix::zeros(n, m);
    let mut x = DMatrix::zeros(n, p);
    let mut lag = vec![0.0; m];
    for (row, t) in (order + 1..=panel.len()).enumerate() {
        fill_lag_row(panel, t, order, &mut lag);
        for (j, v) in lag.iter().enumerate() {
            z[(row, j)] = *v;
        }
        for (i, v) in panel.obs(t).iter().enumerate() {
            x[(row, i)] = *v;
        }
    }
    (z, x)
}

/// Estimates the `p × pq` baseline by fitting each output coordinate on the
/// lagged design of the whole training panel.
pub fn estimate_baseline(training: &TimeSeriesPanel, order: usize, penalty: Penalty) -> Result<DMatrix<f64>> {
    if order == 0 {
        return Err(Error::InvalidParameter("order must be at least 1".into()));
    }
    if training.len() < order + 2 {
        return Err(Error::InsufficientData(format!(
            "{} training rows; at least q + 2 = {} required",
            training.len(),
            order + 2
        )));
    }
    let p = training.dim();
    let m = p * order;
    let (z, x) = lagged_design(training, order);
    if matches!(penalty, Penalty::None) && z.nrows() < m {
        return Err(Error::InsufficientData(format!(
            "{} usable rows for {m} unpenalised coefficients per equation",
            z.nrows()
        )));
    }
    let gram = z.transpose() * &z;
    let cross = z.transpose() * &x;
    let opts = SolverOptions::default();
    let rows: Vec<Result<Vec<f64>>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let c: Vec<f64> = cross.column(i).iter().copied().collect();
            match penalty {
                Penalty::Lasso(lambda) => {
                    check_lambda(lambda)?;
                    let mut beta = vec![0.0; m];
                    lasso_gram(&gram, &c, lambda, &opts, &mut beta);
                    Ok(beta)
                }
                Penalty::Ridge(lambda) => {
                    let y = x.column(i).into_owned();
                    Ok(ridge_solve(&z, &y, lambda)?.coefficients.iter().copied().collect())
                }
                Penalty::None => {
                    let y = x.column(i).into_owned();
                    Ok(ols_solve(&z, &y)?.coefficients.iter().copied().collect())
                }
            }
        })
        .collect();
    let mut theta = DMatrix::zeros(p, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            theta[(i, j)] = v;
        }
    }
    Ok(theta)
}

/// `Σ̂ = (T − q)⁻¹ Σ_t r_t r_tᵀ` with `r_t = x_t − θ̂·lag_t`, `t = q+1..T`.
/// `order = 0` treats the rows themselves as residuals.
pub fn estimate_noise_covariance(
    training: &TimeSeriesPanel,
    theta: &DMatrix<f64>,
    order: usize,
) -> Result<DMatrix<f64>> {
    let p = training.dim();
    let m = p * order;
    if training.len() <= order {
        return Err(Error::InsufficientData(format!(
            "{} rows; more than q = {order} required",
            training.len()
        )));
    }
    if theta.nrows() != p || theta.ncols() != m {
        return Err(Error::InvalidParameter(format!(
            "coefficients are {}x{}, expected {p}x{m}",
            theta.nrows(),
            theta.ncols()
        )));
    }
    let mut lag = vec![0.0; m];
    let mut r = vec![0.0; p];
    let mut acc = DMatrix::zeros(p, p);
    for t in order + 1..=training.len() {
        fill_lag_row(training, t, order, &mut lag);
        fill_residual(training, theta, t, &lag, &mut r);
        for i in 0..p {
            for j in 0..p {
                acc[(i, j)] += r[i] * r[j];
            }
        }
    }
    Ok(acc / (training.len() - order) as f64)
}
