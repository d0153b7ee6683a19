//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

pub(crate) fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= SYMMETRY_TOL * scale))
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Checks symmetry and strict positive definiteness.
pub(crate) fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Covariance(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Covariance(format!("{what} has non-finite entries")));
    }
    if !is_symmetric(m) {
        return Err(Error::Covariance(format!("{what} is not symmetric")));
    }
    let min = min_eigenvalue(m);
    if min <= 0.0 {
        return Err(Error::Covariance(format!(
            "{what} is not positive definite (smallest eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Symmetric inverse square root `Σ^{-1/2}`.
///
/// Diagonal inputs take an exact elementwise path, so `I` maps to `I` and
/// `c·I` to `I/√c` without eigen-solver round-off.
pub(crate) fn inv_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(m, "noise covariance")?;
    if is_diagonal(m) {
        return Ok(DMatrix::from_diagonal(&DVector::from_iterator(
            m.nrows(),
            m.diagonal().iter().map(|d| 1.0 / d.sqrt()),
        )));
    }
    let eig = m.clone().symmetric_eigen();
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&inv_sqrt) * v.transpose();
    // symmetrise round-off
    Ok((&out + out.transpose()) * 0.5)
}

/// Symmetric inverse of an SPD matrix.
pub(crate) fn inv_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(m, "noise covariance")?;
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Covariance("Cholesky factorisation failed".into()))?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Companion matrix of the stacked VAR coefficients `[A_1 … A_q]`.
pub(crate) fn companion(coeffs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let q = coeffs.len();
    let p = coeffs[0].nrows();
    let mut c = DMatrix::zeros(p * q, p * q);
    for (k, a) in coeffs.iter().enumerate() {
        c.view_mut((0, k * p), (p, p)).copy_from(a);
    }
    for k in 1..q {
        for i in 0..p {
            c[(k * p + i, (k - 1) * p + i)] = 1.0;
        }
    }
    c
}

/// Largest eigenvalue modulus.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    // strictly triangular matrices are nilpotent; the Schur route only gets close to 0
    let strictly_upper = (0..m.nrows()).all(|i| (0..=i).all(|j| m[(i, j)] == 0.0));
    let strictly_lower = (0..m.nrows()).all(|i| (i..m.ncols()).all(|j| m[(i, j)] == 0.0));
    if strictly_upper || strictly_lower {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_sqrt_of_scaled_identity_is_exact() {
        let s = DMatrix::<f64>::identity(3, 3) * 4.0;
        let w = inv_sqrt_spd(&s).unwrap();
        assert_eq!(w, DMatrix::identity(3, 3) * 0.5);
    }

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let w = inv_sqrt_spd(&s).unwrap();
        let back = &w * &s * &w;
        assert!((back - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(inv_sqrt_spd(&s), Err(Error::Covariance(_))));
    }

    #[test]
    fn companion_radius_of_ar2() {
        // x_t = 0.5 x_{t-1} + 0.3 x_{t-2}: roots of z^2 - 0.5 z - 0.3
        let coeffs = vec![DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.3)];
        let r = spectral_radius(&companion(&coeffs));
        let expected = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        assert!((r - expected).abs() < 1e-12);
    }
}
