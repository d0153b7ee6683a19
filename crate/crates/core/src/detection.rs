//! Threshold calibration and the offline and online detection procedures.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate_baseline, estimate_noise_covariance, Penalty};
use crate::intervals::{Interval, IntervalSet};
use crate::rng::derive_seed;
use crate::test_stats::{
    scan_regression, statistic_from_moments, IntervalStatistic, Method, MomentAccumulator, PanelRegression, SigmaMode,
    StatConfig,
};
use crate::var_model::{simulate, TimeSeriesPanel, VarParams, DEFAULT_BURN_IN};

pub const DEFAULT_QUANTILE: f64 = 0.99;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_T0: usize = 10;
const MIN_THRESHOLD: f64 = 1e-12;

/// Law used to generate null panels during calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullLaw {
    /// Null panels are scored against the law's own coefficients.
    Known(VarParams),
    /// Each run also simulates a training panel, re-estimates the baseline
    /// (and the noise covariance when the statistic uses an estimated `Σ`)
    /// and scores the null panel against the estimate.
    Reestimated {
        law: VarParams,
        train_len: usize,
        penalty: Penalty,
    },
}

impl NullLaw {
    pub fn law(&self) -> &VarParams {
        match self {
            NullLaw::Known(law) | NullLaw::Reestimated { law, .. } => law,
        }
    }

    /// Simulates one null panel of length `len` and returns it with the
    /// baseline and noise mode to score it against.
    fn draw(
        &self,
        len: usize,
        config: &StatConfig,
        seed: u64,
        run: u64,
    ) -> Result<(TimeSeriesPanel, DMatrix<f64>, SigmaMode)> {
        let law = self.law();
        let panel = simulate(law, len, DEFAULT_BURN_IN, derive_seed(seed, 2 * run))?;
        match self {
            NullLaw::Known(law) => Ok((panel, law.stacked(), config.sigma.clone())),
            NullLaw::Reestimated {
                law,
                train_len,
                penalty,
            } => {
                let train = simulate(law, *train_len, DEFAULT_BURN_IN, derive_seed(seed, 2 * run + 1))?;
                let theta = estimate_baseline(&train, law.order(), *penalty)?;
                let sigma = match &config.sigma {
                    SigmaMode::Estimated(_) => {
                        SigmaMode::Estimated(estimate_noise_covariance(&train, &theta, law.order())?)
                    }
                    other => other.clone(),
                };
                Ok((panel, theta, sigma))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub quantile: f64,
    pub runs: usize,
    pub seed: u64,
    /// Maximum statistic of each null run, in run order.
    pub maxima: Vec<f64>,
}

impl CalibrationResult {
    /// `run,max_statistic` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["run", "max_statistic"])?;
        for (i, m) in self.maxima.iter().enumerate() {
            w.write_record([(i + 1).to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The `⌈B·quantile⌉`-th smallest of the maxima, floored at a tiny positive
/// value.
pub fn threshold_from_maxima(maxima: &[f64], quantile: f64) -> Result<f64> {
    check_quantile(quantile)?;
    if maxima.is_empty() {
        return Err(Error::InvalidParameter("no calibration maxima".into()));
    }
    let mut sorted = maxima.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    let k = ((b as f64 * quantile) - 1e-9).ceil().clamp(1.0, b as f64) as usize;
    Ok(sorted[k - 1].max(MIN_THRESHOLD))
}

fn check_quantile(quantile: f64) -> Result<()> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile {quantile} must lie in (0, 1)"
        )));
    }
    Ok(())
}

fn order_of(baseline: &DMatrix<f64>, p: usize) -> Result<usize> {
    if p == 0 || baseline.nrows() != p || !baseline.ncols().is_multiple_of(p) || baseline.ncols() == 0 {
        return Err(Error::InvalidParameter(format!(
            "baseline is {}x{}, expected {p} x (p·q)",
            baseline.nrows(),
            baseline.ncols()
        )));
    }
    Ok(baseline.ncols() / p)
}

fn max_statistic(stats: &[IntervalStatistic]) -> f64 {
    stats.iter().map(|s| s.value).fold(0.0, f64::max)
}

/// Monte-Carlo threshold: the `quantile` order statistic of `runs` null
/// maxima over `intervals`.
pub fn calibrate_threshold(
    null: &NullLaw,
    intervals: &IntervalSet,
    config: &StatConfig,
    runs: usize,
    quantile: f64,
    seed: u64,
) -> Result<CalibrationResult> {
    if runs == 0 {
        return Err(Error::InvalidParameter("calibration needs at least one run".into()));
    }
    check_quantile(quantile)?;
    config.validate()?;
    let len = intervals.domain().last;
    let order = null.law().order();
    let maxima = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let (panel, theta, sigma) = null.draw(len, config, seed, r)?;
            let cfg = StatConfig {
                sigma,
                ..config.clone()
            };
            let reg = PanelRegression::new(&panel, &theta, order)?;
            let stats = scan_regression(&reg, intervals.intervals(), intervals.min_length(), &cfg)?;
            Ok(max_statistic(&stats))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CalibrationResult {
        threshold: threshold_from_maxima(&maxima, quantile)?,
        quantile,
        runs,
        seed,
        maxima,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineProvenance {
    #[default]
    Known,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Detected intervals in selection order.
    pub detected: Vec<Interval>,
    pub statistics: Vec<IntervalStatistic>,
    pub threshold: f64,
    pub baseline: BaselineProvenance,
    /// Intervals left out because their solver did not converge.
    pub excluded: Vec<Interval>,
}

impl DetectionResult {
    pub fn with_baseline(mut self, baseline: BaselineProvenance) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn is_null(&self) -> bool {
        self.detected.is_empty()
    }

    /// `start,end,statistic,detected` CSV, one row per scanned interval.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["start", "end", "statistic", "detected"])?;
        for s in &self.statistics {
            let hit = self.detected.contains(&s.interval);
            w.write_record([
                s.interval.start.to_string(),
                s.interval.end.to_string(),
                s.value.to_string(),
                hit.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// True when `a` ranks strictly ahead of `b`: larger statistic, then earlier
/// start, then shorter.
fn ranks_before(a: &IntervalStatistic, b: &IntervalStatistic) -> bool {
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => (a.interval.start, a.interval.end) < (b.interval.start, b.interval.end),
    }
}

fn best(stats: &[IntervalStatistic], candidates: impl Iterator<Item = usize>) -> Option<usize> {
    candidates.fold(None, |acc, i| match acc {
        Some(j) if !ranks_before(&stats[i], &stats[j]) => Some(j),
        _ => Some(i),
    })
}

/// Index of the top interval strictly above `threshold`, if any.
pub fn select_single(stats: &[IntervalStatistic], threshold: f64) -> Option<usize> {
    best(
        stats,
        (0..stats.len()).filter(|&i| stats[i].reliable && stats[i].value > threshold),
    )
}

/// Repeatedly takes the top candidate and drops every candidate meeting it.
pub fn select_multiple(stats: &[IntervalStatistic], threshold: f64) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..stats.len())
        .filter(|&i| stats[i].reliable && stats[i].value > threshold)
        .collect();
    let mut picked = Vec::new();
    while let Some(top) = best(stats, alive.iter().copied()) {
        let chosen = stats[top].interval;
        picked.push(top);
        alive.retain(|&i| !stats[i].interval.intersects(&chosen));
    }
    picked
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} must be positive"
        )));
    }
    Ok(())
}

fn scan(
    panel: &TimeSeriesPanel,
    baseline: &DMatrix<f64>,
    intervals: &IntervalSet,
    config: &StatConfig,
) -> Result<Vec<IntervalStatistic>> {
    config.validate()?;
    let order = order_of(baseline, panel.dim())?;
    let reg = PanelRegression::new(panel, baseline, order)?;
    scan_regression(&reg, intervals.intervals(), intervals.min_length(), config)
}

fn finish(stats: Vec<IntervalStatistic>, picked: Vec<usize>, threshold: f64) -> DetectionResult {
    DetectionResult {
        detected: picked.into_iter().map(|i| stats[i].interval).collect(),
        excluded: stats.iter().filter(|s| !s.reliable).map(|s| s.interval).collect(),
        statistics: stats,
        threshold,
        baseline: BaselineProvenance::Known,
    }
}

/// Single-anomaly detection: the top-scoring interval, if it clears the
/// threshold.
pub fn detect_single(
    panel: &TimeSeriesPanel,
    baseline: &DMatrix<f64>,
    intervals: &IntervalSet,
    config: &StatConfig,
    threshold: f64,
) -> Result<DetectionResult> {
    check_threshold(threshold)?;
    let stats = scan(panel, baseline, intervals, config)?;
    let picked = select_single(&stats, threshold).into_iter().collect();
    Ok(finish(stats, picked, threshold))
}

/// Multiple-anomaly detection by greedy selection of disjoint intervals.
pub fn detect_multiple(
    panel: &TimeSeriesPanel,
    baseline: &DMatrix<f64>,
    intervals: &IntervalSet,
    config: &StatConfig,
    threshold: f64,
) -> Result<DetectionResult> {
    check_threshold(threshold)?;
    let stats = scan(panel, baseline, intervals, config)?;
    let picked = select_multiple(&stats, threshold);
    Ok(finish(stats, picked, threshold))
}

/// Windows `[t − 2^{j−1}, t]`, `j = 1, …, ⌊log₂ t⌋`, in increasing `j`.
pub fn online_windows(t: usize) -> Vec<Interval> {
    if t < 2 {
        return Vec::new();
    }
    let jmax = usize::BITS - 1 - t.leading_zeros();
    (1..=jmax)
        .map(|j| Interval {
            start: t - (1usize << (j - 1)),
            end: t,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub stat: StatConfig,
    /// Last time before monitoring starts.
    pub t0: usize,
    /// Horizon entering the penalty rate, with `L = 2`.
    pub lambda_horizon: usize,
    /// Window moments from prefix sums rather than a fresh pass.
    #[serde(default)]
    pub incremental: bool,
}

impl OnlineConfig {
    pub fn new(stat: StatConfig, lambda_horizon: usize) -> Self {
        Self {
            stat,
            t0: DEFAULT_T0,
            lambda_horizon,
            incremental: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineAlarm {
    pub time: usize,
    pub window: Interval,
    pub statistic: f64,
}

/// Streaming detector. Observations are pushed one at a time; from
/// `t0 + 1` on, each push scans the geometric windows ending at `t`.
#[derive(Clone, Debug)]
pub struct OnlineDetector {
    baseline: DMatrix<f64>,
    order: usize,
    dim: usize,
    threshold: f64,
    config: OnlineConfig,
    precision: Option<DMatrix<f64>>,
    // observations, row-major
    history: Vec<f64>,
    // lag and residual rows for t = q+1, q+2, …
    lags: Vec<f64>,
    resid: Vec<f64>,
    // prefix[k] sums rows t = q+1 .. q+k
    prefix: Vec<MomentAccumulator>,
    max_seen: f64,
    stopped: Option<OnlineAlarm>,
}

impl OnlineDetector {
    pub fn new(baseline: DMatrix<f64>, dim: usize, config: OnlineConfig, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        config.stat.validate()?;
        if config.stat.method != Method::Lasso {
            return Err(Error::InvalidParameter(
                "online detection uses the lasso statistic".into(),
            ));
        }
        let order = order_of(&baseline, dim)?;
        if config.t0 < order + 1 {
            return Err(Error::Config(format!(
                "monitoring start t0 = {} leaves fewer than q + 1 = {} observations",
                config.t0,
                order + 1
            )));
        }
        let precision = config.stat.sigma.precision()?;
        let m = dim * order;
        Ok(Self {
            baseline,
            order,
            dim,
            threshold,
            config,
            precision,
            history: Vec::new(),
            lags: Vec::new(),
            resid: Vec::new(),
            prefix: vec![MomentAccumulator::new(m, dim)],
            max_seen: 0.0,
            stopped: None,
        })
    }

    /// Number of observations received.
    pub fn time(&self) -> usize {
        self.history.len() / self.dim
    }

    pub fn stopped(&self) -> Option<OnlineAlarm> {
        self.stopped
    }

    /// Largest window statistic computed so far.
    pub fn max_statistic(&self) -> f64 {
        self.max_seen
    }

    /// Windows scanned at time `t`: the geometric family, minus any window
    /// starting before `q + 1`.
    pub fn windows_at(&self, t: usize) -> Vec<Interval> {
        online_windows(t).into_iter().filter(|j| j.start > self.order).collect()
    }

    fn row(&self, t: usize) -> (&[f64], &[f64]) {
        let m = self.dim * self.order;
        let r = t - self.order - 1;
        (
            &self.lags[r * m..(r + 1) * m],
            &self.resid[r * self.dim..(r + 1) * self.dim],
        )
    }

    fn window_moments(&self, j: Interval) -> crate::test_stats::Moments {
        if self.config.incremental {
            let hi = &self.prefix[j.end - self.order];
            let lo = &self.prefix[j.start - self.order - 1];
            hi.minus(lo)
        } else {
            let mut acc = MomentAccumulator::new(self.dim * self.order, self.dim);
            for t in j.start..=j.end {
                let (z, r) = self.row(t);
                acc.add(z, r);
            }
            acc.finish()
        }
    }

    /// Appends `x_t` and scans if monitoring is active. Returns the alarm
    /// raised at this step, if any. After an alarm further pushes only
    /// record data.
    pub fn push(&mut self, obs: &[f64]) -> Result<Option<OnlineAlarm>> {
        if obs.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "observation has {} entries, expected {}",
                obs.len(),
                self.dim
            )));
        }
        if let Some(bad) = obs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: self.time() + 1,
                column: bad + 1,
                message: "non-finite observation".into(),
            });
        }
        self.history.extend_from_slice(obs);
        let t = self.time();
        if t > self.order {
            let (p, m) = (self.dim, self.dim * self.order);
            let mut lag = vec![0.0; m];
            for k in 1..=self.order {
                lag[(k - 1) * p..k * p].copy_from_slice(&self.history[(t - k - 1) * p..(t - k) * p]);
            }
            let res: Vec<f64> = (0..p)
                .map(|i| obs[i] - (0..m).map(|j| self.baseline[(i, j)] * lag[j]).sum::<f64>())
                .collect();
            if self.config.incremental {
                let mut next = self.prefix.last().cloned().expect("prefix is never empty");
                next.add(&lag, &res);
                self.prefix.push(next);
            }
            self.lags.extend_from_slice(&lag);
            self.resid.extend_from_slice(&res);
        }
        if self.stopped.is_some() || t <= self.config.t0 {
            return Ok(None);
        }
        let windows = self.windows_at(t);
        let stats = windows
            .par_iter()
            .map(|&j| {
                let mom = self.window_moments(j);
                let lambda = self
                    .config
                    .stat
                    .lambda(2, j.len(), self.dim, self.config.lambda_horizon);
                statistic_from_moments(
                    j,
                    &mom,
                    self.precision.as_ref(),
                    Method::Lasso,
                    lambda,
                    &self.config.stat.solver,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        self.max_seen = self.max_seen.max(max_statistic(&stats));
        let alarm = stats.iter().find(|s| s.value > self.threshold).map(|s| OnlineAlarm {
            time: t,
            window: s.interval,
            statistic: s.value,
        });
        self.stopped = alarm;
        Ok(alarm)
    }
}

/// Replays `stream` through an [`OnlineDetector`] until the first alarm or
/// the end of the stream.
pub fn detect_online<I, R>(
    stream: I,
    baseline: &DMatrix<f64>,
    config: &OnlineConfig,
    threshold: f64,
) -> Result<Option<OnlineAlarm>>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut stream = stream.into_iter().peekable();
    let dim = match stream.peek() {
        Some(first) => first.as_ref().len(),
        None => return Ok(None),
    };
    let mut det = OnlineDetector::new(baseline.clone(), dim, config.clone(), threshold)?;
    for obs in stream {
        if let Some(alarm) = det.push(obs.as_ref())? {
            return Ok(Some(alarm));
        }
    }
    Ok(None)
}

/// Online threshold: the `quantile` order statistic of the largest window
/// statistic seen over null streams of length `horizon`.
pub fn calibrate_online_threshold(
    law: &VarParams,
    config: &OnlineConfig,
    horizon: usize,
    runs: usize,
    quantile: f64,
    seed: u64,
) -> Result<CalibrationResult> {
    if runs == 0 {
        return Err(Error::InvalidParameter("calibration needs at least one run".into()));
    }
    check_quantile(quantile)?;
    let maxima = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let panel = simulate(law, horizon, DEFAULT_BURN_IN, derive_seed(seed, r))?;
            let mut det = OnlineDetector::new(law.stacked(), law.dim(), config.clone(), f64::MAX)?;
            for t in 1..=horizon {
                det.push(panel.obs(t))?;
            }
            Ok(det.max_statistic())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CalibrationResult {
        threshold: threshold_from_maxima(&maxima, quantile)?,
        quantile,
        runs,
        seed,
        maxima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::{seeded_intervals, Domain};
    use crate::var_model::{bump_smallest_positive, generate_dense_stationary, simulate_with_anomaly, AnomalyScenario};

    fn iv(s: usize, e: usize) -> Interval {
        Interval::new(s, e).unwrap()
    }

    fn stat(s: usize, e: usize, value: f64) -> IntervalStatistic {
        IntervalStatistic {
            interval: iv(s, e),
            value,
            method: Method::Lasso,
            lambda: 1.0,
            support: 1,
            reliable: true,
        }
    }

    #[test]
    fn quantile_is_lower_order_statistic() {
        let maxima: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(threshold_from_maxima(&maxima, 0.99).unwrap(), 99.0);
        assert_eq!(threshold_from_maxima(&maxima, 0.5).unwrap(), 50.0);
        assert_eq!(threshold_from_maxima(&[3.5; 7], 0.9).unwrap(), 3.5);
        assert_eq!(threshold_from_maxima(&[0.0; 7], 0.9).unwrap(), MIN_THRESHOLD);
        assert!(threshold_from_maxima(&maxima, 1.0).is_err());
        assert!(threshold_from_maxima(&[], 0.5).is_err());
    }

    #[test]
    fn single_tie_break() {
        let stats = vec![stat(5, 20, 9.0), stat(3, 20, 9.0), stat(3, 10, 9.0), stat(1, 2, 1.0)];
        assert_eq!(select_single(&stats, 4.0), Some(2));
        assert_eq!(select_single(&stats, 9.0), None);
    }

    #[test]
    fn multiple_hand_trace() {
        let stats = vec![stat(1, 10, 5.0), stat(5, 15, 9.0), stat(20, 30, 7.0)];
        let picked: Vec<Interval> = select_multiple(&stats, 4.0)
            .into_iter()
            .map(|i| stats[i].interval)
            .collect();
        assert_eq!(picked, vec![iv(5, 15), iv(20, 30)]);
        assert!(select_multiple(&stats, 10.0).is_empty());
    }

    #[test]
    fn multiple_ignores_storage_order() {
        let stats = vec![
            stat(1, 10, 5.0),
            stat(5, 15, 9.0),
            stat(20, 30, 7.0),
            stat(25, 40, 7.0),
            stat(11, 19, 6.0),
        ];
        let base: Vec<Interval> = select_multiple(&stats, 1.0)
            .into_iter()
            .map(|i| stats[i].interval)
            .collect();
        let mut rev = stats.clone();
        rev.reverse();
        let other: Vec<Interval> = select_multiple(&rev, 1.0)
            .into_iter()
            .map(|i| rev[i].interval)
            .collect();
        assert_eq!(base, other);
    }

    #[test]
    fn unreliable_intervals_are_skipped() {
        let mut stats = vec![stat(1, 10, 50.0), stat(5, 15, 9.0)];
        stats[0].reliable = false;
        assert_eq!(select_single(&stats, 1.0), Some(1));
    }

    #[test]
    fn online_window_trace() {
        assert_eq!(online_windows(16), vec![iv(15, 16), iv(14, 16), iv(12, 16), iv(8, 16)]);
        assert_eq!(online_windows(11), vec![iv(10, 11), iv(9, 11), iv(7, 11)]);
        for t in 4..300 {
            let w = online_windows(t);
            assert_eq!(w[0].len(), 2);
            assert!(w.iter().all(|j| j.len() < t));
        }
    }

    #[test]
    fn online_incremental_matches_direct() {
        let params = generate_dense_stationary(4, 2).unwrap();
        let panel = simulate(&params, 150, 50, 3).unwrap();
        let stat = StatConfig::lasso();
        let mut direct = OnlineDetector::new(params.stacked(), 4, OnlineConfig::new(stat.clone(), 150), 1e300).unwrap();
        let mut cfg = OnlineConfig::new(stat, 150);
        cfg.incremental = true;
        let mut inc = OnlineDetector::new(params.stacked(), 4, cfg, 1e300).unwrap();
        for t in 1..=150 {
            direct.push(panel.obs(t)).unwrap();
            inc.push(panel.obs(t)).unwrap();
            if t > 20 {
                for j in direct.windows_at(t) {
                    let a = direct.window_moments(j);
                    let b = inc.window_moments(j);
                    assert!(a.max_abs_diff(&b) < 1e-9);
                }
            }
        }
        assert!((direct.max_statistic() - inc.max_statistic()).abs() < 1e-8);
        assert!(direct.stopped().is_none());
    }

    #[test]
    fn online_rejects_short_warmup() {
        let params = generate_dense_stationary(3, 2).unwrap();
        let mut cfg = OnlineConfig::new(StatConfig::lasso(), 100);
        cfg.t0 = 1;
        assert!(matches!(
            OnlineDetector::new(params.stacked(), 3, cfg, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn strong_anomaly_is_found() {
        let params = generate_dense_stationary(5, 11).unwrap();
        let delta = bump_smallest_positive(&params.stacked(), 5, 0.3);
        let scenario = AnomalyScenario::new(params.clone(), delta, iv(150, 220), 400, DEFAULT_BURN_IN).unwrap();
        let set = seeded_intervals(Domain::for_panel(400, 1).unwrap(), 11, 1.0 / 1.2).unwrap();
        let cfg = StatConfig::lasso();
        let cal = calibrate_threshold(&NullLaw::Known(params.clone()), &set, &cfg, 40, 0.95, 1).unwrap();
        let panel = simulate_with_anomaly(&scenario, 5).unwrap();
        let res = detect_single(&panel, &params.stacked(), &set, &cfg, cal.threshold).unwrap();
        assert_eq!(res.detected.len(), 1);
        assert!(res.detected[0].intersects(&iv(150, 220)));
        let top = res.statistics.iter().map(|s| s.value).fold(0.0, f64::max);
        let found = res.statistics.iter().find(|s| s.interval == res.detected[0]).unwrap();
        assert_eq!(found.value, top);
    }

    #[test]
    fn calibration_is_reproducible() {
        let params = generate_dense_stationary(3, 1).unwrap();
        let set = seeded_intervals(Domain::for_panel(120, 1).unwrap(), 10, 0.5).unwrap();
        let a = calibrate_threshold(&NullLaw::Known(params.clone()), &set, &StatConfig::ols(), 10, 0.9, 4).unwrap();
        let b = calibrate_threshold(&NullLaw::Known(params), &set, &StatConfig::ols(), 10, 0.9, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.threshold > 0.0);
    }

    #[test]
    fn detection_csv_has_flags() {
        let stats = vec![stat(1, 10, 5.0), stat(5, 15, 9.0)];
        let res = finish(stats, vec![1], 4.0);
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "start,end,statistic,detected\n1,10,5,false\n5,15,9,true\n");
    }
}
