//! Coefficient-matrix fixtures for simulation studies.

use nalgebra::DMatrix;
use rand::Rng as _;

use super::params::VarParams;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::rng_from_seed;

pub const DEFAULT_TARGET_RADIUS: f64 = 0.7;

/// Dense VAR(1) coefficients: i.i.d. uniform(−1, 1) entries rescaled so the
/// spectral radius equals `DEFAULT_TARGET_RADIUS`. Identity noise.
pub fn generate_dense_stationary(p: usize, seed: u64) -> Result<VarParams> {
    generate_dense_with_radius(p, DEFAULT_TARGET_RADIUS, seed)
}

pub fn generate_dense_with_radius(p: usize, radius: f64, seed: u64) -> Result<VarParams> {
    if p == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target spectral radius {radius} must lie in (0, 1)"
        )));
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let mut a = DMatrix::from_fn(p, p, |_, _| loop {
            let v: f64 = rng.random_range(-1.0..1.0);
            if v != 0.0 {
                break v;
            }
        });
        let current = linalg::spectral_radius(&a);
        if current > 0.0 && current.is_finite() {
            a *= radius / current;
            return VarParams::var1(a);
        }
    }
}

/// Strictly upper-triangular VAR coefficients with `value` on the first
/// super-diagonal and zeros elsewhere; only lag 1 is nonzero when `order > 1`.
pub fn generate_sparse_offdiag(p: usize, value: f64, order: usize) -> Result<VarParams> {
    if p == 0 || order == 0 {
        return Err(Error::InvalidParameter("dimension and order must be at least 1".into()));
    }
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p.saturating_sub(1) {
        a[(i, i + 1)] = value;
    }
    let mut coeffs = vec![a];
    coeffs.extend((1..order).map(|_| DMatrix::zeros(p, p)));
    VarParams::new(coeffs, DMatrix::identity(p, p))
}

/// Change matrix adding `amount` to the `count` smallest strictly positive
/// entries of `a` (ties broken by column-major position).
pub fn bump_smallest_positive(a: &DMatrix<f64>, count: usize, amount: f64) -> DMatrix<f64> {
    let mut positives: Vec<(usize, f64)> = a.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect();
    positives.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    let mut delta = DMatrix::zeros(a.nrows(), a.ncols());
    for (idx, _) in positives.into_iter().take(count) {
        delta[idx] = amount;
    }
    delta
}
