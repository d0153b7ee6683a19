//! Interval test statistics.
//!
//! For an interval `J` with residual responses `Y_J` and lag block `𝓧_J`, the
//! OLS statistic is `‖Y_J‖² − min_Θ ‖Y_J − X_JΘ‖²` and the lasso statistic is
//! `‖Y_J‖² − min_Θ {‖Y_J − X_JΘ‖² + λ‖Θ‖₁}` with `X_J = I_p ⊗ 𝓧_J`.
//!
//! Both are evaluated from the sufficient statistics `G = 𝓧ᵀ𝓧` and
//! `C = 𝓧ᵀY`. With identity noise the problem splits into `p` independent
//! lassos sharing `G`. With a noise covariance `Σ` the whitened design is
//! `Σ^{-1/2} ⊗ 𝓧`, which couples the equations through `P = Σ⁻¹`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{lasso_gram, ols_solve, soft_threshold, SolverOptions};
use crate::intervals::{Interval, IntervalSet};
use crate::linalg;
use crate::var_model::{fill_lag_row, fill_residual, RegressionView, TimeSeriesPanel};

pub const DEFAULT_LAMBDA_CONSTANT: f64 = 0.15;

// eigenvalue ratio below which a Gram matrix counts as singular
const GRAM_RANK_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    Lasso,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ols => "ols",
            Method::Lasso => "lasso",
        })
    }
}

/// Which length enters the penalty rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaScale {
    /// The minimum length `L` of the interval collection.
    #[default]
    MinLength,
    /// Each interval's own length `|J|`.
    IntervalLength,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "matrix", rename_all = "snake_case")]
pub enum SigmaMode {
    #[default]
    Identity,
    Known(DMatrix<f64>),
    Estimated(DMatrix<f64>),
}

impl SigmaMode {
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            SigmaMode::Identity => None,
            SigmaMode::Known(m) | SigmaMode::Estimated(m) => Some(m),
        }
    }

    /// `Σ⁻¹`, or `None` for identity.
    pub fn precision(&self) -> Result<Option<DMatrix<f64>>> {
        self.matrix().map(linalg::inv_spd).transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatConfig {
    pub method: Method,
    /// Constant `C` in `λ = C·√(L(2 ln p + ln T))`.
    pub lambda_constant: f64,
    #[serde(default)]
    pub lambda_scale: LambdaScale,
    #[serde(default)]
    pub sigma: SigmaMode,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl StatConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            lambda_constant: DEFAULT_LAMBDA_CONSTANT,
            lambda_scale: LambdaScale::MinLength,
            sigma: SigmaMode::Identity,
            solver: SolverOptions::default(),
        }
    }

    pub fn lasso() -> Self {
        Self::new(Method::Lasso)
    }

    pub fn ols() -> Self {
        Self::new(Method::Ols)
    }

    pub fn with_lambda_constant(mut self, c: f64) -> Self {
        self.lambda_constant = c;
        self
    }

    pub fn with_sigma(mut self, sigma: SigmaMode) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_constant >= 0.0) || !self.lambda_constant.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda constant {} must be finite and >= 0",
                self.lambda_constant
            )));
        }
        if let Some(m) = self.sigma.matrix() {
            linalg::check_spd(m, "noise covariance")?;
        }
        self.solver.validate()
    }

    /// Penalty for an interval of length `interval_len` in a collection with
    /// minimum length `min_len`, panel dimension `p` and horizon `horizon`.
    pub fn lambda(&self, min_len: usize, interval_len: usize, p: usize, horizon: usize) -> f64 {
        let len = match self.lambda_scale {
            LambdaScale::MinLength => min_len,
            LambdaScale::IntervalLength => interval_len,
        };
        default_lambda(len, p, horizon, self.lambda_constant)
    }
}

/// `C·√(L·(2 ln p + ln T))`.
pub fn default_lambda(min_len: usize, p: usize, horizon: usize, constant: f64) -> f64 {
    constant * (min_len as f64 * (2.0 * (p as f64).ln() + (horizon as f64).ln())).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalStatistic {
    pub interval: Interval,
    pub value: f64,
    pub method: Method,
    pub lambda: f64,
    /// Nonzero entries in the fitted change.
    pub support: usize,
    /// False when the solver hit its sweep limit.
    pub reliable: bool,
}

/// Returns the view left-multiplied by `Σ^{-1/2}` in every time slice.
pub fn whiten(view: &RegressionView, sigma: &DMatrix<f64>) -> Result<RegressionView> {
    if sigma.nrows() != view.dim() {
        return Err(Error::Covariance(format!(
            "covariance is {}x{}, view dimension is {}",
            sigma.nrows(),
            sigma.ncols(),
            view.dim()
        )));
    }
    let w = linalg::inv_sqrt_spd(sigma)?;
    if w == DMatrix::identity(view.dim(), view.dim()) {
        return Ok(view.clone());
    }
    Ok(view.whitened(&w))
}

/// Sufficient statistics of one interval: `G = 𝓧ᵀ𝓧` and `C = 𝓧ᵀY`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub rows: usize,
    pub gram: DMatrix<f64>,
    pub cross: DMatrix<f64>,
}

impl Moments {
    fn of_view(view: &RegressionView) -> Self {
        let x = view.predictors();
        Self {
            rows: x.nrows(),
            gram: x.transpose() * x,
            cross: x.transpose() * view.response_matrix(),
        }
    }

    /// Elementwise closeness, for cross-checking accumulation routes.
    pub fn max_abs_diff(&self, other: &Moments) -> f64 {
        (&self.gram - &other.gram)
            .amax()
            .max((&self.cross - &other.cross).amax())
    }
}

fn check_gram_rank(gram: &DMatrix<f64>, rows: usize) -> Result<()> {
    let m = gram.nrows();
    if rows < m {
        return Err(Error::IllPosedDesign(format!(
            "{rows} rows for {m} lag coefficients per equation"
        )));
    }
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0 && lo > GRAM_RANK_TOL * hi) {
        return Err(Error::IllPosedDesign(format!(
            "lag block is rank deficient (Gram eigenvalues {lo:e} / {hi:e})"
        )));
    }
    Ok(())
}

/// `tr(Cᵀ G⁻¹ C P)`; the projection norm of the (whitened) responses.
fn ols_value(mom: &Moments, precision: Option<&DMatrix<f64>>) -> Result<f64> {
    check_gram_rank(&mom.gram, mom.rows)?;
    let chol = mom
        .gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::IllPosedDesign("lag Gram matrix not positive definite".into()))?;
    let beta = chol.solve(&mom.cross);
    let value = match precision {
        None => mom.cross.component_mul(&beta).sum(),
        Some(pm) => (mom.cross.transpose() * &beta * pm).trace(),
    };
    Ok(value.max(0.0))
}

struct LassoOutcome {
    value: f64,
    support: usize,
    converged: bool,
}

/// Maximises `2 tr(BᵀD) − tr(P BᵀGB) − λ‖B‖₁` over `m × p` matrices `B`.
fn lasso_value(
    gram: &DMatrix<f64>,
    d: &DMatrix<f64>,
    precision: Option<&DMatrix<f64>>,
    lambda: f64,
    opts: &SolverOptions,
) -> LassoOutcome {
    match precision {
        None => decoupled_lasso(gram, d, lambda, opts),
        Some(pm) => coupled_lasso(gram, d, pm, lambda, opts),
    }
}

fn decoupled_lasso(gram: &DMatrix<f64>, d: &DMatrix<f64>, lambda: f64, opts: &SolverOptions) -> LassoOutcome {
    let m = gram.nrows();
    let mut value = 0.0;
    let mut support = 0;
    let mut converged = true;
    let mut beta = vec![0.0; m];
    for col in d.column_iter() {
        let c: Vec<f64> = col.iter().copied().collect();
        beta.iter_mut().for_each(|b| *b = 0.0);
        let (_, ok) = lasso_gram(gram, &c, lambda, opts, &mut beta);
        converged &= ok;
        let mut quad = 0.0;
        for a in 0..m {
            if beta[a] == 0.0 {
                continue;
            }
            support += 1;
            let mut row = 0.0;
            for b in 0..m {
                row += gram[(a, b)] * beta[b];
            }
            quad += beta[a] * row;
            value += 2.0 * c[a] * beta[a] - lambda * beta[a].abs();
        }
        value -= quad;
    }
    LassoOutcome {
        value: value.max(0.0),
        support,
        converged,
    }
}

fn coupled_lasso(
    gram: &DMatrix<f64>,
    d: &DMatrix<f64>,
    pm: &DMatrix<f64>,
    lambda: f64,
    opts: &SolverOptions,
) -> LassoOutcome {
    let (m, p) = d.shape();
    let half = lambda / 2.0;
    let mut b = DMatrix::<f64>::zeros(m, p);
    // running G·B·P
    let mut gbp = DMatrix::<f64>::zeros(m, p);
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let mut max_delta = 0.0f64;
        for i in 0..p {
            for a in 0..m {
                let h = gram[(a, a)] * pm[(i, i)];
                if h <= 0.0 {
                    continue;
                }
                let z = d[(a, i)] - gbp[(a, i)] + h * b[(a, i)];
                let new = soft_threshold(z, half) / h;
                let delta = new - b[(a, i)];
                if delta != 0.0 {
                    b[(a, i)] = new;
                    for k in 0..p {
                        let pk = pm[(i, k)] * delta;
                        if pk != 0.0 {
                            for r in 0..m {
                                gbp[(r, k)] += gram[(r, a)] * pk;
                            }
                        }
                    }
                    max_delta = max_delta.max(delta.abs());
                }
            }
        }
        if max_delta <= opts.tolerance {
            converged = true;
            break;
        }
    }
    let value = 2.0 * b.component_mul(d).sum() - b.component_mul(&gbp).sum() - lambda * b.abs().sum();
    LassoOutcome {
        value: value.max(0.0),
        support: b.iter().filter(|v| **v != 0.0).count(),
        converged,
    }
}

/// OLS statistic on a view, via one least-squares fit per response column.
pub fn ols_statistic(view: &RegressionView) -> Result<IntervalStatistic> {
    let x = view.predictors();
    if x.nrows() < x.ncols() {
        return Err(Error::IllPosedDesign(format!(
            "|J| = {} < pq = {}",
            x.nrows(),
            x.ncols()
        )));
    }
    // W ⊗ 𝓧 spans the same space column-by-column as I ⊗ 𝓧 for invertible W
    let y = view.response_matrix();
    let mut value = 0.0;
    for col in y.column_iter() {
        let col: DVector<f64> = col.into_owned();
        let fit = ols_solve(x, &col)?;
        value += col.norm_squared() - fit.objective;
    }
    Ok(IntervalStatistic {
        interval: view.interval(),
        value: value.max(0.0),
        method: Method::Ols,
        lambda: 0.0,
        support: x.ncols() * view.dim(),
        reliable: true,
    })
}

/// Lasso statistic on a view.
pub fn lasso_statistic(view: &RegressionView, lambda: f64, opts: &SolverOptions) -> Result<IntervalStatistic> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty {lambda} must be finite and >= 0"
        )));
    }
    opts.validate()?;
    let mom = Moments::of_view(view);
    let outcome = match view.mixing() {
        None => lasso_value(&mom.gram, &mom.cross, None, lambda, opts),
        Some(w) => {
            let d = &mom.cross * w;
            let pm = w.transpose() * w;
            lasso_value(&mom.gram, &d, Some(&pm), lambda, opts)
        }
    };
    Ok(IntervalStatistic {
        interval: view.interval(),
        value: outcome.value,
        method: Method::Lasso,
        lambda,
        support: outcome.support,
        reliable: outcome.converged,
    })
}

/// Lag rows and baseline residuals of a panel, precomputed once so that many
/// intervals can be scored cheaply.
#[derive(Clone, Debug)]
pub struct PanelRegression {
    order: usize,
    dim: usize,
    len: usize,
    // row t-(q+1) holds data for time t
    lags: Vec<f64>,
    resid: Vec<f64>,
}

impl PanelRegression {
    pub fn new(panel: &TimeSeriesPanel, baseline: &DMatrix<f64>, order: usize) -> Result<Self> {
        let p = panel.dim();
        let m = p * order;
        if order == 0 {
            return Err(Error::InvalidParameter("order must be at least 1".into()));
        }
        if baseline.nrows() != p || baseline.ncols() != m {
            return Err(Error::InvalidParameter(format!(
                "baseline is {}x{}, expected {p}x{m}",
                baseline.nrows(),
                baseline.ncols()
            )));
        }
        if panel.len() <= order {
            return Err(Error::InsufficientData(format!(
                "panel of {} rows has no lagged observations for order {order}",
                panel.len()
            )));
        }
        let rows = panel.len() - order;
        let mut lags = vec![0.0; rows * m];
        let mut resid = vec![0.0; rows * p];
        for t in order + 1..=panel.len() {
            let r = t - order - 1;
            let lag = &mut lags[r * m..(r + 1) * m];
            fill_lag_row(panel, t, order, lag);
            fill_residual(panel, baseline, t, lag, &mut resid[r * p..(r + 1) * p]);
        }
        Ok(Self {
            order,
            dim: p,
            len: panel.len(),
            lags,
            resid,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Lag row and residual at time `t`.
    pub fn row(&self, t: usize) -> (&[f64], &[f64]) {
        let m = self.dim * self.order;
        let r = t - self.order - 1;
        (
            &self.lags[r * m..(r + 1) * m],
            &self.resid[r * self.dim..(r + 1) * self.dim],
        )
    }

    pub fn moments(&self, interval: Interval) -> Result<Moments> {
        if interval.start < self.order + 1 {
            return Err(Error::InsufficientLags {
                start: interval.start,
                order: self.order,
            });
        }
        if interval.end > self.len {
            return Err(Error::InvalidParameter(format!(
                "interval {interval} exceeds panel length {}",
                self.len
            )));
        }
        let m = self.dim * self.order;
        let mut acc = MomentAccumulator::new(m, self.dim);
        for t in interval.start..=interval.end {
            let (z, r) = self.row(t);
            acc.add(z, r);
        }
        Ok(acc.finish())
    }
}

/// Running sums of `z zᵀ` and `z rᵀ`.
#[derive(Clone, Debug)]
pub(crate) struct MomentAccumulator {
    m: usize,
    p: usize,
    rows: usize,
    gram: Vec<f64>,
    cross: Vec<f64>,
}

impl MomentAccumulator {
    pub(crate) fn new(m: usize, p: usize) -> Self {
        Self {
            m,
            p,
            rows: 0,
            gram: vec![0.0; m * m],
            cross: vec![0.0; m * p],
        }
    }

    pub(crate) fn add(&mut self, z: &[f64], r: &[f64]) {
        let m = self.m;
        self.rows += 1;
        for a in 0..m {
            let za = z[a];
            if za == 0.0 {
                continue;
            }
            let row = &mut self.gram[a * m..(a + 1) * m];
            for b in a..m {
                row[b] += za * z[b];
            }
            let crow = &mut self.cross[a * self.p..(a + 1) * self.p];
            for (c, ri) in crow.iter_mut().zip(r) {
                *c += za * ri;
            }
        }
    }

    /// `self − earlier`, for prefix-sum differencing.
    pub(crate) fn minus(&self, earlier: &MomentAccumulator) -> Moments {
        let mut d = self.clone();
        d.rows -= earlier.rows;
        d.gram.iter_mut().zip(&earlier.gram).for_each(|(a, b)| *a -= b);
        d.cross.iter_mut().zip(&earlier.cross).for_each(|(a, b)| *a -= b);
        d.finish()
    }

    pub(crate) fn finish(&self) -> Moments {
        let m = self.m;
        let gram = DMatrix::from_fn(m, m, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            self.gram[a * m + b]
        });
        let cross = DMatrix::from_fn(m, self.p, |a, i| self.cross[a * self.p + i]);
        Moments {
            rows: self.rows,
            gram,
            cross,
        }
    }
}

/// Scores one interval from its moments. `precision` is `Σ⁻¹` or `None`.
pub fn statistic_from_moments(
    interval: Interval,
    mom: &Moments,
    precision: Option<&DMatrix<f64>>,
    method: Method,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<IntervalStatistic> {
    match method {
        Method::Ols => Ok(IntervalStatistic {
            interval,
            value: ols_value(mom, precision)?,
            method,
            lambda: 0.0,
            support: mom.cross.len(),
            reliable: true,
        }),
        Method::Lasso => {
            let outcome = match precision {
                None => lasso_value(&mom.gram, &mom.cross, None, lambda, opts),
                Some(pm) => lasso_value(&mom.gram, &(&mom.cross * pm), Some(pm), lambda, opts),
            };
            Ok(IntervalStatistic {
                interval,
                value: outcome.value,
                method,
                lambda,
                support: outcome.support,
                reliable: outcome.converged,
            })
        }
    }
}

/// Scores every interval of `set` on `panel` against `baseline`.
/// Results follow the order of `set`.
pub fn scan_intervals(
    panel: &TimeSeriesPanel,
    baseline: &DMatrix<f64>,
    order: usize,
    set: &IntervalSet,
    config: &StatConfig,
) -> Result<Vec<IntervalStatistic>> {
    config.validate()?;
    let reg = PanelRegression::new(panel, baseline, order)?;
    scan_regression(&reg, set.intervals(), set.min_length(), config)
}

pub(crate) fn scan_regression(
    reg: &PanelRegression,
    intervals: &[Interval],
    min_len: usize,
    config: &StatConfig,
) -> Result<Vec<IntervalStatistic>> {
    let precision = config.sigma.precision()?;
    intervals
        .par_iter()
        .map(|&j| {
            let mom = reg.moments(j)?;
            let lambda = config.lambda(min_len, j.len(), reg.dim(), reg.len());
            statistic_from_moments(j, &mom, precision.as_ref(), config.method, lambda, &config.solver)
        })
        .collect()
}
