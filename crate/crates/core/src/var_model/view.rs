use nalgebra::{DMatrix, DVector};

use super::panel::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::intervals::Interval;

/// Writes the lag row `(x_{t-1}', …, x_{t-q}')` into `out` (length `p·q`).
pub(crate) fn fill_lag_row(panel: &TimeSeriesPanel, t: usize, q: usize, out: &mut [f64]) {
    let p = panel.dim();
    for k in 1..=q {
        out[(k - 1) * p..k * p].copy_from_slice(panel.obs(t - k));
    }
}

/// Writes `x_t − θ·lag` into `out` (length `p`).
pub(crate) fn fill_residual(panel: &TimeSeriesPanel, baseline: &DMatrix<f64>, t: usize, lag: &[f64], out: &mut [f64]) {
    let x = panel.obs(t);
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = x[i];
        for (j, z) in lag.iter().enumerate() {
            acc -= baseline[(i, j)] * z;
        }
        *o = acc;
    }
}

/// The anomaly regression restricted to an interval `J`:
/// `Y_J = (W ⊗ 𝓧_J) Θ + E_J`, with `W = I` unless the view was whitened.
///
/// `response` stacks the `p` residual columns (column-major), so that for an
/// unwhitened view the full design is `I_p ⊗ predictors`. The full design is
/// never materialised.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionView {
    interval: Interval,
    dim: usize,
    response: DVector<f64>,
    predictors: DMatrix<f64>,
    mixing: Option<DMatrix<f64>>,
}

impl RegressionView {
    /// Assembles a view from raw parts; mainly for tests and bindings.
    pub fn from_parts(
        interval: Interval,
        dim: usize,
        response: DVector<f64>,
        predictors: DMatrix<f64>,
    ) -> Result<Self> {
        let n = predictors.nrows();
        if n != interval.len() {
            return Err(Error::InvalidParameter(format!(
                "predictor block has {n} rows for an interval of length {}",
                interval.len()
            )));
        }
        if response.len() != n * dim {
            return Err(Error::InvalidParameter(format!(
                "response length {} != |J|·p = {}",
                response.len(),
                n * dim
            )));
        }
        Ok(Self {
            interval,
            dim,
            response,
            predictors,
            mixing: None,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.predictors.nrows()
    }

    /// Vectorised response, length `|J|·p`.
    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    /// Response reshaped to `|J| × p`.
    pub fn response_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows(), self.dim, self.response.as_slice())
    }

    /// The `|J| × pq` block `𝓧⁽²⁾_J`.
    pub fn predictors(&self) -> &DMatrix<f64> {
        &self.predictors
    }

    /// `W` in the implied design `W ⊗ 𝓧`; `None` means identity.
    pub fn mixing(&self) -> Option<&DMatrix<f64>> {
        self.mixing.as_ref()
    }

    /// Materialises the full `|J|p × p·pq` design. Test and oracle use only.
    pub fn dense_design(&self) -> DMatrix<f64> {
        let w = self
            .mixing
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.dim, self.dim));
        w.kronecker(&self.predictors)
    }

    pub(crate) fn whitened(&self, w: &DMatrix<f64>) -> Self {
        let y = self.response_matrix();
        // each time slice y_t -> W y_t, i.e. Y -> Y W'
        let yw = &y * w.transpose();
        let mixing = match &self.mixing {
            Some(m) => w * m,
            None => w.clone(),
        };
        Self {
            interval: self.interval,
            dim: self.dim,
            response: DVector::from_column_slice(yw.as_slice()),
            predictors: self.predictors.clone(),
            mixing: Some(mixing),
        }
    }
}

/// Builds the regression view of `panel` on `interval` for baseline `θ⁽¹⁾`
/// (`p × pq`): responses `x_t − θ⁽¹⁾·lag_t`, predictors `lag_t`, `t ∈ J`.
pub fn build_regression_view(
    panel: &TimeSeriesPanel,
    baseline: &DMatrix<f64>,
    interval: Interval,
    order: usize,
) -> Result<RegressionView> {
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
    if interval.start < order + 1 {
        return Err(Error::InsufficientLags {
            start: interval.start,
            order,
        });
    }
    if interval.end > panel.len() {
        return Err(Error::InvalidParameter(format!(
            "interval {interval} exceeds panel length {}",
            panel.len()
        )));
    }
    let n = interval.len();
    let mut predictors = DMatrix::zeros(n, m);
    let mut response = DVector::zeros(n * p);
    let mut lag = vec![0.0; m];
    let mut resid = vec![0.0; p];
    for (row, t) in (interval.start..=interval.end).enumerate() {
        fill_lag_row(panel, t, order, &mut lag);
        fill_residual(panel, baseline, t, &lag, &mut resid);
        for (j, v) in lag.iter().enumerate() {
            predictors[(row, j)] = *v;
        }
        for (i, r) in resid.iter().enumerate() {
            response[i * n + row] = *r;
        }
    }
    Ok(RegressionView {
        interval,
        dim: p,
        response,
        predictors,
        mixing: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var_model::{simulate, VarParams};

    #[test]
    fn hand_evaluated_scalar_view() {
        // rows x_1..x_3 = (1, 2, 5); θ = 0.5; J = [2, 3]
        let panel = TimeSeriesPanel::from_rows(&[vec![1.0], vec![2.0], vec![5.0]]).unwrap();
        let theta = DMatrix::from_element(1, 1, 0.5);
        let view = build_regression_view(&panel, &theta, Interval::new(2, 3).unwrap(), 1).unwrap();
        assert_eq!(view.response().as_slice(), &[1.5, 4.0]);
        assert_eq!(view.predictors().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn dimension_contract() {
        let params = VarParams::var1(DMatrix::from_element(10, 10, 0.01)).unwrap();
        let panel = simulate(&params, 100, 0, 1).unwrap();
        let view = build_regression_view(&panel, &params.stacked(), Interval::new(31, 60).unwrap(), 1).unwrap();
        assert_eq!(view.response().len(), 300);
        assert_eq!(view.predictors().shape(), (30, 10));
        let design = view.dense_design();
        assert_eq!(design.shape(), (300, 100));
    }

    #[test]
    fn insufficient_lags() {
        let panel = TimeSeriesPanel::from_rows(&[vec![1.0], vec![2.0], vec![5.0]]).unwrap();
        let theta = DMatrix::zeros(1, 2);
        let err = build_regression_view(&panel, &theta, Interval::new(2, 3).unwrap(), 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientLags { start: 2, order: 2 }));
    }

    #[test]
    fn true_baseline_leaves_noise() {
        // rebuild innovations by hand and compare
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.3]);
        let params = VarParams::var1(a.clone()).unwrap();
        let panel = simulate(&params, 50, 10, 2).unwrap();
        let view = build_regression_view(&panel, &a, Interval::new(5, 20).unwrap(), 1).unwrap();
        let y = view.response_matrix();
        for (row, t) in (5..=20).enumerate() {
            let prev = nalgebra::DVector::from_column_slice(panel.obs(t - 1));
            let cur = nalgebra::DVector::from_column_slice(panel.obs(t));
            let eps = cur - &a * prev;
            for i in 0..2 {
                assert!((y[(row, i)] - eps[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adding_back_predictions_reconstructs_rows() {
        let a1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.2]);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.1, -0.1]);
        let params = VarParams::new(vec![a1, a2], DMatrix::identity(2, 2)).unwrap();
        let panel = simulate(&params, 40, 5, 8).unwrap();
        let theta = params.stacked();
        let view = build_regression_view(&panel, &theta, Interval::new(3, 40).unwrap(), 2).unwrap();
        let recon = view.response_matrix() + view.predictors() * theta.transpose();
        for (row, t) in (3..=40).enumerate() {
            for i in 0..2 {
                assert!((recon[(row, i)] - panel.obs(t)[i]).abs() < 1e-12);
            }
        }
    }
}
