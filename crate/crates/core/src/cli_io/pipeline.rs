use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SigmaChoice};
use super::{atomic_write, difference, load_panel};
use crate::detection::{
    calibrate_online_threshold, calibrate_threshold, detect_multiple, detect_single, BaselineProvenance,
    CalibrationResult, DetectionResult, NullLaw, OnlineAlarm, OnlineConfig, OnlineDetector,
};
use crate::error::{Error, Result};
use crate::estimation::{estimate_baseline, estimate_noise_covariance};
use crate::intervals::{Domain, Interval, IntervalSet, Provenance};
use crate::rng::derive_seed;
use crate::test_stats::{Method, SigmaMode, StatConfig};
use crate::var_model::{TimeSeriesPanel, VarParams};

/// First and last row (1-based, inclusive) of each slice of the analysed
/// panel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRows {
    pub train: [usize; 2],
    pub calibration: [usize; 2],
    pub test: [usize; 2],
}

impl SplitRows {
    fn new(counts: [usize; 3]) -> Self {
        let [a, b, c] = counts;
        Self {
            train: [1, a],
            calibration: [a + 1, a + b],
            test: [a + b + 1, a + b + c],
        }
    }

    fn test_offset(&self) -> usize {
        self.test[0] - 1
    }
}

/// Everything needed to re-run a pipeline without the original config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub data: String,
    pub config: RunConfig,
    /// Rows and columns after optional differencing.
    pub rows: usize,
    pub dim: usize,
    pub split: SplitRows,
    pub baseline: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    /// Penalty at the minimum length (`None` for OLS).
    pub lambda: Option<f64>,
    pub interval_count: usize,
    pub interval_provenance: Provenance,
    pub threshold: f64,
    /// `calibrated` or `configured`.
    pub threshold_source: String,
    /// Detected intervals in test-slice time.
    pub detected: Vec<Interval>,
    /// The same intervals as rows of the analysed panel.
    pub detected_rows: Vec<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected_labels: Option<Vec<[String; 2]>>,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub manifest: RunManifest,
    pub detection: DetectionResult,
    pub calibration: Option<CalibrationResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub data: String,
    pub config: RunConfig,
    pub split: SplitRows,
    pub baseline: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub interval_count: usize,
    pub threshold: f64,
    pub runs: usize,
    pub quantile: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub data: String,
    pub config: RunConfig,
    pub split: SplitRows,
    pub baseline: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub threshold: f64,
    pub threshold_source: String,
    /// Length of the monitored stream.
    pub horizon: usize,
    /// Alarm in stream time, if any.
    pub alarm: Option<OnlineAlarm>,
    /// Alarm time as a row of the analysed panel.
    pub alarm_row: Option<usize>,
}

struct Prepared {
    config: RunConfig,
    data: String,
    panel_rows: usize,
    dim: usize,
    split: SplitRows,
    test: TimeSeriesPanel,
    labels: Option<Vec<String>>,
    theta: DMatrix<f64>,
    sigma_hat: DMatrix<f64>,
}

impl Prepared {
    fn stat_config(&self) -> StatConfig {
        let sigma = match self.config.sigma {
            SigmaChoice::Identity => SigmaMode::Identity,
            SigmaChoice::Estimated => SigmaMode::Estimated(self.sigma_hat.clone()),
        };
        StatConfig {
            lambda_scale: self.config.lambda_scale,
            ..StatConfig::new(self.config.method).with_lambda_constant(self.config.lambda_constant)
        }
        .with_sigma(sigma)
    }

    fn law(&self) -> Result<VarParams> {
        VarParams::from_stacked(&self.theta, self.config.order, self.sigma_hat.clone())
    }

    fn intervals(&self) -> Result<IntervalSet> {
        let domain = Domain::for_panel(self.test.len(), self.config.order)?;
        self.config.build_intervals(domain, self.dim)
    }

    fn calibrate(&self, intervals: &IntervalSet) -> Result<CalibrationResult> {
        let null = NullLaw::Reestimated {
            law: self.law()?,
            train_len: self.split.train[1],
            penalty: self.penalty(),
        };
        calibrate_threshold(
            &null,
            intervals,
            &self.stat_config(),
            self.config.calibration_runs,
            self.config.quantile,
            derive_seed(self.config.seed, 2),
        )
    }

    fn penalty(&self) -> crate::estimation::Penalty {
        self.config
            .baseline_penalty
            .resolve(self.split.train[1], self.dim, self.config.lambda_constant)
    }
}

fn prepare(config: &RunConfig, data: &Path) -> Result<Prepared> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let raw = load_panel(data, config.has_header, config.delimiter_byte(), config.time_column)
        .map_err(|e| e.in_stage("load"))?;
    let panel = if config.difference {
        difference(&raw).map_err(|e| e.in_stage("load"))?
    } else {
        raw
    };
    let dim = panel.dim();
    config.validate_for(dim).map_err(|e| e.in_stage("config"))?;
    let config = config.resolved(dim);
    let counts = config.split_counts(panel.len());
    let q = config.order;
    if counts[0] < q + 2 || counts[1] <= q || counts[2] <= q {
        return Err(Error::InsufficientData(format!(
            "split {counts:?} of {} rows leaves a slice too short for order {q}",
            panel.len()
        ))
        .in_stage("split"));
    }
    let split = SplitRows::new(counts);
    let slice = |r: [usize; 2]| panel.slice(r[0], r[1]).map_err(|e| e.in_stage("split"));
    let (train, calib, test) = (slice(split.train)?, slice(split.calibration)?, slice(split.test)?);
    let penalty = config
        .baseline_penalty
        .resolve(train.len(), dim, config.lambda_constant);
    let theta = estimate_baseline(&train, q, penalty).map_err(|e| e.in_stage("estimation"))?;
    let sigma_hat = estimate_noise_covariance(&calib, &theta, q).map_err(|e| e.in_stage("estimation"))?;
    Ok(Prepared {
        labels: test.timestamps().map(|t| t.to_vec()),
        config,
        data: data.display().to_string(),
        panel_rows: panel.len(),
        dim,
        split,
        test,
        theta,
        sigma_hat,
    })
}

fn write_out(out_dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    atomic_write(&out_dir.join(name), bytes).map_err(|e| e.in_stage("output"))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| e.in_stage("output"))?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::from(e).in_stage("output"))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn create_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::from(e).in_stage("output"))
}

/// Offline pipeline: split, estimate, calibrate, detect, and write
/// `manifest.json`, `statistics.csv`, `detection.csv` and (when calibrated)
/// `calibration.csv` into `out_dir`.
pub fn run_pipeline(config: &RunConfig, data: &Path, out_dir: &Path) -> Result<PipelineOutput> {
    let prep = prepare(config, data)?;
    let intervals = prep.intervals().map_err(|e| e.in_stage("intervals"))?;
    let (threshold, calibration, source) = match prep.config.threshold {
        Some(th) => (th, None, "configured"),
        None => {
            let cal = prep.calibrate(&intervals).map_err(|e| e.in_stage("calibration"))?;
            (cal.threshold, Some(cal), "calibrated")
        }
    };
    let stat = prep.stat_config();
    let detect = if prep.config.multiple {
        detect_multiple
    } else {
        detect_single
    };
    let detection = detect(&prep.test, &prep.theta, &intervals, &stat, threshold)
        .map_err(|e| e.in_stage("detection"))?
        .with_baseline(BaselineProvenance::Estimated);

    let offset = prep.split.test_offset();
    let detected_rows = detection
        .detected
        .iter()
        .map(|j| Interval::new(j.start + offset, j.end + offset))
        .collect::<Result<Vec<_>>>()?;
    let detected_labels = prep.labels.as_ref().map(|ts| {
        detection
            .detected
            .iter()
            .map(|j| [ts[j.start - 1].clone(), ts[j.end - 1].clone()])
            .collect()
    });
    let manifest = RunManifest {
        data: prep.data.clone(),
        config: prep.config.clone(),
        rows: prep.panel_rows,
        dim: prep.dim,
        split: prep.split,
        baseline: prep.theta.clone(),
        noise_cov: prep.sigma_hat.clone(),
        lambda: (prep.config.method == Method::Lasso).then(|| {
            stat.lambda(
                intervals.min_length(),
                intervals.min_length(),
                prep.dim,
                prep.test.len(),
            )
        }),
        interval_count: intervals.len(),
        interval_provenance: intervals.provenance().clone(),
        threshold,
        threshold_source: source.into(),
        detected: detection.detected.clone(),
        detected_rows,
        detected_labels,
        excluded: detection.excluded.len(),
    };

    create_dir(out_dir)?;
    let hits = DetectionResult {
        statistics: detection
            .statistics
            .iter()
            .filter(|s| detection.detected.contains(&s.interval))
            .cloned()
            .collect(),
        ..detection.clone()
    };
    write_out(out_dir, "statistics.csv", &csv_bytes(|b| detection.write_csv(b))?)?;
    write_out(out_dir, "detection.csv", &csv_bytes(|b| hits.write_csv(b))?)?;
    if let Some(cal) = &calibration {
        write_out(out_dir, "calibration.csv", &csv_bytes(|b| cal.write_csv(b))?)?;
    }
    write_out(out_dir, "manifest.json", &json_bytes(&manifest)?)?;
    Ok(PipelineOutput {
        manifest,
        detection,
        calibration,
    })
}

/// Calibration only: writes `calibration.csv` and `calibration.json`.
pub fn calibrate_from_config(
    config: &RunConfig,
    data: &Path,
    out_dir: &Path,
) -> Result<(CalibrationArtifact, CalibrationResult)> {
    let prep = prepare(config, data)?;
    let intervals = prep.intervals().map_err(|e| e.in_stage("intervals"))?;
    let cal = prep.calibrate(&intervals).map_err(|e| e.in_stage("calibration"))?;
    let artifact = CalibrationArtifact {
        data: prep.data.clone(),
        config: prep.config.clone(),
        split: prep.split,
        baseline: prep.theta.clone(),
        noise_cov: prep.sigma_hat.clone(),
        interval_count: intervals.len(),
        threshold: cal.threshold,
        runs: cal.runs,
        quantile: cal.quantile,
        seed: cal.seed,
    };
    create_dir(out_dir)?;
    write_out(out_dir, "calibration.csv", &csv_bytes(|b| cal.write_csv(b))?)?;
    write_out(out_dir, "calibration.json", &json_bytes(&artifact)?)?;
    Ok((artifact, cal))
}

/// Online pipeline: the test slice is replayed row by row through an
/// [`OnlineDetector`]. Writes `online.json` (and `calibration.csv` when
/// calibrated).
pub fn run_online_pipeline(config: &RunConfig, data: &Path, out_dir: &Path) -> Result<OnlineReport> {
    if config.method != Method::Lasso {
        return Err(Error::Config("online detection uses the lasso statistic".into()).in_stage("config"));
    }
    let prep = prepare(config, data)?;
    let horizon = prep.test.len();
    let online = OnlineConfig {
        t0: prep.config.t0,
        incremental: prep.config.incremental,
        ..OnlineConfig::new(prep.stat_config(), horizon)
    };
    let (threshold, calibration, source) = match prep.config.threshold {
        Some(th) => (th, None, "configured"),
        None => {
            let cal = prep
                .law()
                .and_then(|law| {
                    calibrate_online_threshold(
                        &law,
                        &online,
                        horizon,
                        prep.config.calibration_runs,
                        prep.config.quantile,
                        derive_seed(prep.config.seed, 2),
                    )
                })
                .map_err(|e| e.in_stage("calibration"))?;
            (cal.threshold, Some(cal), "calibrated")
        }
    };
    let mut det =
        OnlineDetector::new(prep.theta.clone(), prep.dim, online, threshold).map_err(|e| e.in_stage("detection"))?;
    let mut alarm = None;
    for t in 1..=horizon {
        if let Some(a) = det.push(prep.test.obs(t)).map_err(|e| e.in_stage("detection"))? {
            alarm = Some(a);
            break;
        }
    }
    let report = OnlineReport {
        data: prep.data.clone(),
        config: prep.config.clone(),
        split: prep.split,
        baseline: prep.theta.clone(),
        noise_cov: prep.sigma_hat.clone(),
        threshold,
        threshold_source: source.into(),
        horizon,
        alarm,
        alarm_row: alarm.map(|a| a.time + prep.split.test_offset()),
    };
    create_dir(out_dir)?;
    if let Some(cal) = &calibration {
        write_out(out_dir, "calibration.csv", &csv_bytes(|b| cal.write_csv(b))?)?;
    }
    write_out(out_dir, "online.json", &json_bytes(&report)?)?;
    Ok(report)
}
