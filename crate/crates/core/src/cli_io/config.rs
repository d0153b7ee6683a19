use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{DEFAULT_QUANTILE, DEFAULT_RUNS, DEFAULT_T0};
use crate::error::{Error, Result};
use crate::estimation::PenaltyKind;
use crate::intervals::{random_intervals, seeded_intervals, Domain, IntervalSet};
use crate::rng::derive_seed;
use crate::test_stats::{LambdaScale, Method, DEFAULT_LAMBDA_CONSTANT};

/// Candidate interval family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntervalScheme {
    /// `count` uniform draws; `seed` defaults to a stream of the master seed.
    Random {
        count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Deterministic layers with decay `a ∈ [1/2, 1)`.
    Seeded { decay: f64 },
}

impl Default for IntervalScheme {
    fn default() -> Self {
        IntervalScheme::Random {
            count: 1000,
            seed: None,
        }
    }
}

/// Noise covariance used by the statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaChoice {
    #[default]
    Identity,
    /// `Σ̂` from the calibration slice's residuals.
    Estimated,
}

/// A run configuration, read from TOML. Every field has a default, so an
/// empty file is a valid configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub order: usize,
    pub method: Method,
    pub intervals: IntervalScheme,
    /// Minimum interval length; `p·q + 1` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_length: Option<usize>,
    pub lambda_constant: f64,
    pub lambda_scale: LambdaScale,
    pub sigma: SigmaChoice,
    pub quantile: f64,
    pub calibration_runs: usize,
    pub baseline_penalty: PenaltyKind,
    /// Fractions of rows for training, calibration and testing.
    pub split: [f64; 3],
    pub seed: u64,
    /// Difference the series before splitting.
    pub difference: bool,
    /// Report every disjoint exceedance instead of the single best.
    pub multiple: bool,
    /// Skip calibration and use this threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub has_header: bool,
    pub delimiter: char,
    /// Zero-based column holding time labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_column: Option<usize>,
    /// Online monitoring start.
    pub t0: usize,
    pub incremental: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            order: 1,
            method: Method::Lasso,
            intervals: IntervalScheme::default(),
            min_length: None,
            lambda_constant: DEFAULT_LAMBDA_CONSTANT,
            lambda_scale: LambdaScale::MinLength,
            sigma: SigmaChoice::Identity,
            quantile: DEFAULT_QUANTILE,
            calibration_runs: DEFAULT_RUNS,
            baseline_penalty: PenaltyKind::Ridge,
            split: [0.25, 0.25, 0.5],
            seed: 0,
            difference: false,
            multiple: false,
            threshold: None,
            has_header: false,
            delimiter: ',',
            time_column: None,
            t0: DEFAULT_T0,
            incremental: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if self.split.iter().any(|f| !(*f > 0.0)) || self.split.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "split fractions {:?} must be positive with sum at most 1",
                self.split
            )));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::Config(format!("quantile {} must lie in (0, 1)", self.quantile)));
        }
        if self.calibration_runs == 0 && self.threshold.is_none() {
            return Err(Error::Config("calibration_runs must be positive".into()));
        }
        if !(self.lambda_constant >= 0.0 && self.lambda_constant.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_constant {} must be finite and >= 0",
                self.lambda_constant
            )));
        }
        if let Some(th) = self.threshold {
            if !(th > 0.0 && th.is_finite()) {
                return Err(Error::Config(format!("threshold {th} must be positive")));
            }
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!(
                "delimiter '{}' must be a single ASCII character",
                self.delimiter
            )));
        }
        match self.intervals {
            IntervalScheme::Random { count: 0, .. } => {
                return Err(Error::Config("random interval count must be positive".into()))
            }
            IntervalScheme::Seeded { decay } if !(0.5..1.0).contains(&decay) => {
                return Err(Error::Config(format!("seeded decay {decay} must lie in [1/2, 1)")))
            }
            _ => {}
        }
        Ok(())
    }

    /// Checks the parts that depend on the panel dimension.
    pub fn validate_for(&self, p: usize) -> Result<()> {
        self.validate()?;
        let pq = p * self.order;
        let l = self.resolved_min_length(p);
        if self.method == Method::Ols && l <= pq {
            return Err(Error::Config(format!("OLS needs min_length > p·q = {pq}, got {l}")));
        }
        if self.t0 < self.order + 1 {
            return Err(Error::Config(format!("t0 = {} must be at least q + 1", self.t0)));
        }
        Ok(())
    }

    pub fn resolved_min_length(&self, p: usize) -> usize {
        self.min_length.unwrap_or(p * self.order + 1)
    }

    pub fn delimiter_byte(&self) -> u8 {
        self.delimiter as u8
    }

    /// The config with every data-dependent default filled in.
    pub fn resolved(&self, p: usize) -> Self {
        let mut out = self.clone();
        out.min_length = Some(self.resolved_min_length(p));
        if let IntervalScheme::Random { count, seed: None } = self.intervals {
            out.intervals = IntervalScheme::Random {
                count,
                seed: Some(derive_seed(self.seed, 1)),
            };
        }
        out
    }

    pub fn build_intervals(&self, domain: Domain, p: usize) -> Result<IntervalSet> {
        let l = self.resolved_min_length(p);
        match self.resolved(p).intervals {
            IntervalScheme::Random { count, seed } => random_intervals(domain, l, count, seed.unwrap_or_default()),
            IntervalScheme::Seeded { decay } => seeded_intervals(domain, l, decay),
        }
    }

    /// Row counts of the three slices of a `len`-row panel.
    pub fn split_counts(&self, len: usize) -> [usize; 3] {
        self.split.map(|f| (f * len as f64 + 1e-9).floor() as usize)
    }
}
