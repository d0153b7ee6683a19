//! Python bindings. Matrices cross the boundary as lists of rows and
//! intervals as `(start, end)` tuples.

use std::path::Path;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use var_anomaly::cli_io::{run_pipeline as run_pipeline_rs, RunConfig};
use var_anomaly::detection::DetectionResult;
use var_anomaly::estimation::Penalty;
use var_anomaly::{
    calibrate_threshold as calibrate_rs, detect_multiple, detect_single, estimate_baseline as estimate_rs,
    hausdorff_distance as hausdorff_rs, Domain, Error, Interval, IntervalSet, Method, NullLaw, OnlineConfig, SigmaMode,
    StatConfig, TimeSeriesPanel, VarParams,
};

fn root(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } => root(source),
        other => other,
    }
}

fn to_py(e: Error) -> PyErr {
    match root(&e) {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ if e.is_input_error() => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows have unequal lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn panel(rows: &[Vec<f64>]) -> PyResult<TimeSeriesPanel> {
    TimeSeriesPanel::from_rows(rows).map_err(to_py)
}

fn method(name: &str) -> PyResult<Method> {
    match name {
        "lasso" => Ok(Method::Lasso),
        "ols" => Ok(Method::Ols),
        other => Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    }
}

fn stat_config(name: &str, lambda_constant: f64, sigma: Option<Vec<Vec<f64>>>) -> PyResult<StatConfig> {
    let mut cfg = StatConfig::new(method(name)?).with_lambda_constant(lambda_constant);
    if let Some(s) = sigma {
        cfg = cfg.with_sigma(SigmaMode::Known(matrix(&s)?));
    }
    Ok(cfg)
}

fn interval_set(
    intervals: &[(usize, usize)],
    min_length: usize,
    horizon: usize,
    order: usize,
) -> PyResult<IntervalSet> {
    let list = intervals
        .iter()
        .map(|&(s, e)| Interval::new(s, e))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let domain = Domain::for_panel(horizon, order).map_err(to_py)?;
    IntervalSet::explicit(list, min_length, domain).map_err(to_py)
}

fn pairs(set: &IntervalSet) -> Vec<(usize, usize)> {
    set.intervals().iter().map(|j| (j.start, j.end)).collect()
}

/// Stationary VAR(q) law.
#[pyclass(name = "VarParams", module = "var_anomaly_py", skip_from_py_object)]
pub struct PyVarParams {
    inner: VarParams,
}

#[pymethods]
impl PyVarParams {
    /// `coeffs` is a list of `p × p` lag matrices; `noise_cov` defaults to
    /// the identity.
    #[new]
    #[pyo3(signature = (coeffs, noise_cov=None))]
    fn new(coeffs: Vec<Vec<Vec<f64>>>, noise_cov: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let mats = coeffs.iter().map(|c| matrix(c)).collect::<PyResult<Vec<_>>>()?;
        let p = mats.first().map_or(0, |m| m.nrows());
        let sigma = match noise_cov {
            Some(s) => matrix(&s)?,
            None => DMatrix::identity(p, p),
        };
        Ok(Self {
            inner: VarParams::new(mats, sigma).map_err(to_py)?,
        })
    }

    /// From the stacked `p × pq` matrix `[A₁ … A_q]`.
    #[staticmethod]
    #[pyo3(signature = (stacked, order, noise_cov=None))]
    fn from_stacked(stacked: Vec<Vec<f64>>, order: usize, noise_cov: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let s = matrix(&stacked)?;
        let sigma = match noise_cov {
            Some(c) => matrix(&c)?,
            None => DMatrix::identity(s.nrows(), s.nrows()),
        };
        Ok(Self {
            inner: VarParams::from_stacked(&s, order, sigma).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn stacked(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.stacked())
    }

    fn spectral_radius(&self) -> f64 {
        self.inner.spectral_radius()
    }

    fn __repr__(&self) -> String {
        format!("VarParams(dim={}, order={})", self.inner.dim(), self.inner.order())
    }
}

/// Outcome of an offline scan.
#[pyclass(name = "Detection", module = "var_anomaly_py", get_all, skip_from_py_object)]
pub struct PyDetection {
    pub detected: Vec<(usize, usize)>,
    pub threshold: f64,
    /// `(start, end, statistic)` for every scanned interval.
    pub statistics: Vec<(usize, usize, f64)>,
    pub excluded: Vec<(usize, usize)>,
}

impl From<DetectionResult> for PyDetection {
    fn from(r: DetectionResult) -> Self {
        Self {
            detected: r.detected.iter().map(|j| (j.start, j.end)).collect(),
            threshold: r.threshold,
            statistics: r
                .statistics
                .iter()
                .map(|s| (s.interval.start, s.interval.end, s.value))
                .collect(),
            excluded: r.excluded.iter().map(|j| (j.start, j.end)).collect(),
        }
    }
}

#[pymethods]
impl PyDetection {
    fn __repr__(&self) -> String {
        format!("Detection(detected={:?}, threshold={})", self.detected, self.threshold)
    }
}

/// Streaming lasso detector.
#[pyclass(name = "OnlineDetector", module = "var_anomaly_py", skip_from_py_object)]
pub struct PyOnlineDetector {
    inner: var_anomaly::OnlineDetector,
}

#[pymethods]
impl PyOnlineDetector {
    #[new]
    #[pyo3(signature = (baseline, threshold, horizon, t0=10, lambda_constant=0.15, incremental=false))]
    fn new(
        baseline: Vec<Vec<f64>>,
        threshold: f64,
        horizon: usize,
        t0: usize,
        lambda_constant: f64,
        incremental: bool,
    ) -> PyResult<Self> {
        let theta = matrix(&baseline)?;
        let config = OnlineConfig {
            t0,
            incremental,
            ..OnlineConfig::new(StatConfig::lasso().with_lambda_constant(lambda_constant), horizon)
        };
        let dim = theta.nrows();
        Ok(Self {
            inner: var_anomaly::OnlineDetector::new(theta, dim, config, threshold).map_err(to_py)?,
        })
    }

    /// Feeds one observation; returns `(time, start, end, statistic)` on alarm.
    fn push(&mut self, obs: Vec<f64>) -> PyResult<Option<(usize, usize, usize, f64)>> {
        Ok(self
            .inner
            .push(&obs)
            .map_err(to_py)?
            .map(|a| (a.time, a.window.start, a.window.end, a.statistic)))
    }

    #[getter]
    fn time(&self) -> usize {
        self.inner.time()
    }

    #[getter]
    fn max_statistic(&self) -> f64 {
        self.inner.max_statistic()
    }
}

/// Simulates `length` observations after `burn_in` discarded ones.
#[pyfunction]
#[pyo3(signature = (params, length, seed, burn_in=100))]
pub fn simulate(params: &PyVarParams, length: usize, seed: u64, burn_in: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(var_anomaly::simulate(&params.inner, length, burn_in, seed)
        .map_err(to_py)?
        .to_rows())
}

#[pyfunction]
pub fn random_intervals(
    first: usize,
    last: usize,
    min_length: usize,
    count: usize,
    seed: u64,
) -> PyResult<Vec<(usize, usize)>> {
    let domain = Domain::new(first, last).map_err(to_py)?;
    Ok(pairs(
        &var_anomaly::random_intervals(domain, min_length, count, seed).map_err(to_py)?,
    ))
}

#[pyfunction]
pub fn seeded_intervals(first: usize, last: usize, min_length: usize, decay: f64) -> PyResult<Vec<(usize, usize)>> {
    let domain = Domain::new(first, last).map_err(to_py)?;
    Ok(pairs(
        &var_anomaly::seeded_intervals(domain, min_length, decay).map_err(to_py)?,
    ))
}

/// Penalty `C·√(L(2 ln p + ln T))`.
#[pyfunction]
#[pyo3(signature = (min_length, p, horizon, constant=0.15))]
pub fn default_lambda(min_length: usize, p: usize, horizon: usize, constant: f64) -> f64 {
    var_anomaly::default_lambda(min_length, p, horizon, constant)
}

/// Baseline `p × pq` coefficients; `penalty` is `lasso`, `ridge` or `none`.
#[pyfunction]
#[pyo3(signature = (panel_rows, order, penalty="none", lam=0.0))]
pub fn estimate_baseline(panel_rows: Vec<Vec<f64>>, order: usize, penalty: &str, lam: f64) -> PyResult<Vec<Vec<f64>>> {
    let pen = match penalty {
        "lasso" => Penalty::Lasso(lam),
        "ridge" => Penalty::Ridge(lam),
        "none" => Penalty::None,
        other => return Err(PyValueError::new_err(format!("unknown penalty '{other}'"))),
    };
    Ok(rows_of(&estimate_rs(&panel(&panel_rows)?, order, pen).map_err(to_py)?))
}

/// Returns `(threshold, maxima)` from null panels of `params`.
#[pyfunction]
#[pyo3(signature = (params, intervals, min_length, horizon, method="lasso", runs=100, quantile=0.99, seed=0, lambda_constant=0.15))]
#[allow(clippy::too_many_arguments)]
pub fn calibrate_threshold(
    params: &PyVarParams,
    intervals: Vec<(usize, usize)>,
    min_length: usize,
    horizon: usize,
    method: &str,
    runs: usize,
    quantile: f64,
    seed: u64,
    lambda_constant: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let set = interval_set(&intervals, min_length, horizon, params.inner.order())?;
    let cfg = stat_config(method, lambda_constant, None)?;
    let cal = calibrate_rs(&NullLaw::Known(params.inner.clone()), &set, &cfg, runs, quantile, seed).map_err(to_py)?;
    Ok((cal.threshold, cal.maxima))
}

/// Scans `intervals` of `panel_rows` against `baseline` and selects the
/// best interval (or all disjoint exceedances when `multiple`).
#[pyfunction]
#[pyo3(signature = (panel_rows, baseline, intervals, min_length, threshold, method="lasso", multiple=false, lambda_constant=0.15, sigma=None))]
#[allow(clippy::too_many_arguments)]
pub fn detect(
    panel_rows: Vec<Vec<f64>>,
    baseline: Vec<Vec<f64>>,
    intervals: Vec<(usize, usize)>,
    min_length: usize,
    threshold: f64,
    method: &str,
    multiple: bool,
    lambda_constant: f64,
    sigma: Option<Vec<Vec<f64>>>,
) -> PyResult<PyDetection> {
    let data = panel(&panel_rows)?;
    let theta = matrix(&baseline)?;
    if theta.nrows() == 0 || theta.ncols() % theta.nrows() != 0 {
        return Err(PyValueError::new_err("baseline must be p x pq"));
    }
    let set = interval_set(&intervals, min_length, data.len(), theta.ncols() / theta.nrows())?;
    let cfg = stat_config(method, lambda_constant, sigma)?;
    let run = if multiple { detect_multiple } else { detect_single };
    Ok(run(&data, &theta, &set, &cfg, threshold).map_err(to_py)?.into())
}

#[pyfunction]
#[pyo3(signature = (truth, estimate, empty_value))]
pub fn hausdorff_distance(truth: Vec<usize>, estimate: Vec<usize>, empty_value: f64) -> PyResult<f64> {
    hausdorff_rs(&truth, &estimate, empty_value).map_err(to_py)
}

/// Runs the file pipeline with a TOML configuration string and returns the
/// manifest as JSON.
#[pyfunction]
pub fn run_pipeline(config_toml: &str, data_path: &str, out_dir: &str) -> PyResult<String> {
    let cfg = RunConfig::from_toml_str(config_toml).map_err(to_py)?;
    let out = run_pipeline_rs(&cfg, Path::new(data_path), Path::new(out_dir)).map_err(to_py)?;
    serde_json::to_string(&out.manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn var_anomaly_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVarParams>()?;
    m.add_class::<PyDetection>()?;
    m.add_class::<PyOnlineDetector>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(random_intervals, m)?)?;
    m.add_function(wrap_pyfunction!(seeded_intervals, m)?)?;
    m.add_function(wrap_pyfunction!(default_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff_distance, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
