use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A `T × p` panel of observations, rows indexed by time.
///
/// Time indices in the public API are 1-based: [`obs`](Self::obs)`(1)` is the
/// first row.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesPanel {
    // row-major, len = rows * dim
    data: Vec<f64>,
    rows: usize,
    dim: usize,
    timestamps: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    pub fn from_row_major(data: Vec<f64>, rows: usize, dim: usize) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "panel must be at least 1x1, got {rows}x{dim}"
            )));
        }
        if data.len() != rows * dim {
            return Err(Error::InvalidParameter(format!(
                "panel buffer has {} values, expected {}",
                data.len(),
                rows * dim
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at row {}, column {}",
                idx / dim + 1,
                idx % dim + 1
            )));
        }
        Ok(Self {
            data,
            rows,
            dim,
            timestamps: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidParameter(format!(
                "row {} has {} values, expected {dim}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::from_row_major(rows.concat(), rows.len(), dim)
    }

    pub fn from_matrix(values: &DMatrix<f64>) -> Result<Self> {
        let rows = values.nrows();
        let dim = values.ncols();
        let data = (0..rows).flat_map(|i| (0..dim).map(move |j| values[(i, j)])).collect();
        Self::from_row_major(data, rows, dim)
    }

    /// Attaches time labels; they must be strictly increasing, compared
    /// numerically when every label parses as a number and lexically otherwise.
    pub fn with_timestamps(mut self, timestamps: Vec<String>) -> Result<Self> {
        if timestamps.len() != self.rows {
            return Err(Error::InvalidParameter(format!(
                "{} timestamps for {} rows",
                timestamps.len(),
                self.rows
            )));
        }
        let numeric: Option<Vec<f64>> = timestamps.iter().map(|s| s.trim().parse().ok()).collect();
        let increasing = match &numeric {
            Some(v) => v.windows(2).all(|w| w[0] < w[1]),
            None => timestamps.windows(2).all(|w| w[0].cmp(&w[1]) == Ordering::Less),
        };
        if !increasing {
            return Err(Error::InvalidParameter("timestamps must be strictly increasing".into()));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Dimension `p`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Observation at 1-based time `t`.
    pub fn obs(&self, t: usize) -> &[f64] {
        assert!(t >= 1 && t <= self.rows, "time {t} outside [1, {}]", self.rows);
        &self.data[(t - 1) * self.dim..t * self.dim]
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.dim, &self.data)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Rows `first..=last` (1-based, inclusive) as a new panel.
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        if first < 1 || last > self.rows || first > last {
            return Err(Error::InvalidParameter(format!(
                "slice [{first}, {last}] outside panel of {} rows",
                self.rows
            )));
        }
        let data = self.data[(first - 1) * self.dim..last * self.dim].to_vec();
        let mut out = Self::from_row_major(data, last - first + 1, self.dim)?;
        out.timestamps = self.timestamps.as_ref().map(|ts| ts[first - 1..last].to_vec());
        Ok(out)
    }
}
