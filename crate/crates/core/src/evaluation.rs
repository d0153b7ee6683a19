//! Scoring detections against ground truth.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detection::BaselineProvenance;
use crate::error::{Error, Result};
use crate::intervals::Interval;
use crate::test_stats::Method;

/// Hausdorff distance between two point sets on the time axis.
/// An empty `estimate` scores `empty_convention`.
pub fn hausdorff_distance(truth: &[usize], estimate: &[usize], empty_convention: f64) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Contract("Hausdorff distance needs a nonempty truth set".into()));
    }
    if estimate.is_empty() {
        return Ok(empty_convention);
    }
    let directed = |from: &[usize], to: &[usize]| {
        from.iter()
            .map(|&a| to.iter().map(|&b| a.abs_diff(b)).min().unwrap_or(0))
            .max()
            .unwrap_or(0)
    };
    Ok(directed(truth, estimate).max(directed(estimate, truth)) as f64)
}

/// Start and end of every interval.
pub fn boundary_points(intervals: &[Interval]) -> Vec<usize> {
    intervals.iter().flat_map(|j| [j.start, j.end]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub truth: Vec<Interval>,
    pub estimate: Vec<Interval>,
    pub horizon: usize,
    pub seed: u64,
    pub method: Method,
    /// Label of the candidate family, e.g. `random` or `seeded`.
    pub intervals: String,
    pub baseline: BaselineProvenance,
}

impl ScenarioOutcome {
    pub fn detected(&self) -> bool {
        !self.estimate.is_empty()
    }

    /// Boundary Hausdorff distance, with the horizon for empty estimates.
    pub fn hausdorff(&self) -> Result<f64> {
        hausdorff_distance(
            &boundary_points(&self.truth),
            &boundary_points(&self.estimate),
            self.horizon as f64,
        )
    }
}

/// Fraction of runs with at least one detection.
pub fn empirical_power(outcomes: &[ScenarioOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Contract("no outcomes to aggregate".into()));
    }
    Ok(outcomes.iter().filter(|o| o.detected()).count() as f64 / outcomes.len() as f64)
}

/// Number of runs by number of detected intervals.
pub fn count_distribution(outcomes: &[ScenarioOutcome]) -> Result<BTreeMap<usize, usize>> {
    if outcomes.is_empty() {
        return Err(Error::Contract("no outcomes to aggregate".into()));
    }
    let mut hist = BTreeMap::new();
    for o in outcomes {
        *hist.entry(o.estimate.len()).or_insert(0) += 1;
    }
    Ok(hist)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffSummary {
    /// Mean and standard deviation over all runs, empty estimates scored as `T`.
    pub mean: f64,
    pub sd: f64,
    /// `mean / T · 100`.
    pub mean_percent: f64,
    /// Mean over runs that detected something; `None` if none did.
    pub mean_detected: Option<f64>,
    pub empty_runs: usize,
    pub runs: usize,
}

pub fn hausdorff_summary(outcomes: &[ScenarioOutcome]) -> Result<HausdorffSummary> {
    if outcomes.is_empty() {
        return Err(Error::Contract("no outcomes to aggregate".into()));
    }
    let values = outcomes.iter().map(|o| o.hausdorff()).collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let detected: Vec<f64> = outcomes
        .iter()
        .zip(&values)
        .filter(|(o, _)| o.detected())
        .map(|(_, v)| *v)
        .collect();
    let horizon = outcomes[0].horizon as f64;
    Ok(HausdorffSummary {
        mean,
        sd,
        mean_percent: mean / horizon * 100.0,
        mean_detected: (!detected.is_empty()).then(|| detected.iter().sum::<f64>() / detected.len() as f64),
        empty_runs: outcomes.len() - detected.len(),
        runs: outcomes.len(),
    })
}

/// A results table: one row per (interval scheme, method), one column per
/// baseline mode or other condition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub scheme: String,
    pub method: Method,
    pub values: Vec<Option<f64>>,
}

impl ResultTable {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, scheme: impl Into<String>, method: Method, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::Contract(format!(
                "row has {} values for {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        self.rows.push(TableRow {
            scheme: scheme.into(),
            method,
            values,
        });
        Ok(())
    }

    pub fn get(&self, scheme: &str, method: Method, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.method == method)
            .and_then(|r| r.values[c])
    }

    /// `scheme,method,<columns…>` CSV; missing cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["scheme".to_string(), "method".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.scheme.clone(), r.method.to_string()];
            rec.extend(
                r.values
                    .iter()
                    .map(|v| v.map(|x| format!("{x:.4}")).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl std::fmt::Display for ResultTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", self.title)?;
        write!(f, "{:<10} {:<6}", "scheme", "method")?;
        for c in &self.columns {
            write!(f, " {c:>12}")?;
        }
        writeln!(f)?;
        for r in &self.rows {
            write!(f, "{:<10} {:<6}", r.scheme, r.method)?;
            for v in &r.values {
                match v {
                    Some(x) => write!(f, " {x:>12.3}")?,
                    None => write!(f, " {:>12}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
