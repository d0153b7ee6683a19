use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Law of a stationary VAR(q) process: coefficient stack `A_1 … A_q` and
/// Gaussian innovation covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarParams {
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
}

impl VarParams {
    pub fn new(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::RejectedParameters("order must be at least 1".into()));
        }
        let p = coeffs[0].nrows();
        if p == 0 {
            return Err(Error::RejectedParameters("dimension must be at least 1".into()));
        }
        for (k, a) in coeffs.iter().enumerate() {
            if a.nrows() != p || a.ncols() != p {
                return Err(Error::RejectedParameters(format!(
                    "coefficient matrix {} is {}x{}, expected {p}x{p}",
                    k + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::RejectedParameters(format!(
                    "coefficient matrix {} has non-finite entries",
                    k + 1
                )));
            }
        }
        if noise_cov.nrows() != p || noise_cov.ncols() != p {
            return Err(Error::RejectedParameters(format!(
                "noise covariance is {}x{}, expected {p}x{p}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        linalg::check_spd(&noise_cov, "noise covariance").map_err(|e| Error::RejectedParameters(e.to_string()))?;
        let radius = linalg::spectral_radius(&linalg::companion(&coeffs));
        if radius.is_nan() || radius >= 1.0 {
            return Err(Error::RejectedParameters(format!(
                "process is not stationary: companion spectral radius {radius:.6} >= 1"
            )));
        }
        Ok(Self { coeffs, noise_cov })
    }

    /// VAR(1) with identity innovation covariance.
    pub fn var1(a: DMatrix<f64>) -> Result<Self> {
        let p = a.nrows();
        Self::new(vec![a], DMatrix::identity(p, p))
    }

    /// Builds params from the stacked `p × pq` matrix `[A_1 … A_q]`.
    pub fn from_stacked(stacked: &DMatrix<f64>, order: usize, noise_cov: DMatrix<f64>) -> Result<Self> {
        let p = stacked.nrows();
        if order == 0 || stacked.ncols() != p * order {
            return Err(Error::RejectedParameters(format!(
                "stacked coefficients are {}x{}, expected {p}x{}",
                stacked.nrows(),
                stacked.ncols(),
                p * order
            )));
        }
        let coeffs = (0..order).map(|k| stacked.columns(k * p, p).into_owned()).collect();
        Self::new(coeffs, noise_cov)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.noise_cov.nrows()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// `[A_1 … A_q]`, the `p × pq` baseline `θ` used by regression views.
    pub fn stacked(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut out = DMatrix::zeros(p, p * self.order());
        for (k, a) in self.coeffs.iter().enumerate() {
            out.columns_mut(k * p, p).copy_from(a);
        }
        out
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&linalg::companion(&self.coeffs))
    }
}
