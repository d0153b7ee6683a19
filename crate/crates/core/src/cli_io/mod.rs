//! File formats, configuration and the end-to-end pipelines behind the
//! command-line tool.

mod config;
mod pipeline;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::var_model::TimeSeriesPanel;

pub use config::{IntervalScheme, RunConfig, SigmaChoice};
pub use pipeline::{
    calibrate_from_config, run_online_pipeline, run_pipeline, CalibrationArtifact, OnlineReport, PipelineOutput,
    RunManifest, SplitRows,
};

/// Reads a numeric CSV panel: rows are time points, columns are series.
/// With `time_column` set, that column becomes the panel's time labels.
pub fn load_panel(path: &Path, has_header: bool, delimiter: u8, time_column: Option<usize>) -> Result<TimeSeriesPanel> {
    let file = fs::File::open(path)?;
    read_panel(file, has_header, delimiter, time_column)
}

pub fn read_panel<R: std::io::Read>(
    reader: R,
    has_header: bool,
    delimiter: u8,
    time_column: Option<usize>,
) -> Result<TimeSeriesPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let offset = usize::from(has_header);
    let mut data = Vec::new();
    let mut stamps = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1 + offset;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    row: line,
                    column: rec.len().min(w) + 1,
                    message: format!("row has {} fields, expected {w}", rec.len()),
                })
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            if Some(j) == time_column {
                stamps.push(field.to_string());
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: j + 1,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: j + 1,
                    message: "non-finite value".into(),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::InsufficientData("panel file has no data rows".into()))?;
    let dim = width - usize::from(time_column.is_some_and(|c| c < width));
    if let Some(c) = time_column {
        if c >= width {
            return Err(Error::Config(format!("time column {c} outside {width} columns")));
        }
    }
    let panel = TimeSeriesPanel::from_row_major(data, rows, dim)?;
    if time_column.is_some() {
        panel.with_timestamps(stamps)
    } else {
        Ok(panel)
    }
}

/// Writes a panel as CSV with an `x1,…,xp` header (and a leading `time`
/// column when labels are present).
pub fn write_panel<W: Write>(panel: &TimeSeriesPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = Vec::new();
    if panel.timestamps().is_some() {
        header.push("time".into());
    }
    header.extend((1..=panel.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for t in 1..=panel.len() {
        let mut rec: Vec<String> = Vec::with_capacity(panel.dim() + 1);
        if let Some(ts) = panel.timestamps() {
            rec.push(ts[t - 1].clone());
        }
        rec.extend(panel.obs(t).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// First differences: row `t` of the output is `x_{t+1} − x_t`.
pub fn difference(panel: &TimeSeriesPanel) -> Result<TimeSeriesPanel> {
    if panel.len() < 2 {
        return Err(Error::Contract("differencing needs at least two rows".into()));
    }
    let p = panel.dim();
    let data: Vec<f64> = (1..panel.len())
        .flat_map(|t| {
            let (a, b) = (panel.obs(t), panel.obs(t + 1));
            (0..p).map(move |i| b[i] - a[i])
        })
        .collect();
    let out = TimeSeriesPanel::from_row_major(data, panel.len() - 1, p)?;
    match panel.timestamps() {
        Some(ts) => out.with_timestamps(ts[1..].to_vec()),
        None => Ok(out),
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("'{}' is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
