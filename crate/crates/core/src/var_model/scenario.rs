use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::params::VarParams;
use crate::error::{Error, Result};
use crate::intervals::Interval;

/// One anomalous episode: the coefficient change `Θ` applied on a closed window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub window: Interval,
    /// `A⁽²⁾ − A⁽¹⁾`, `p × pq`.
    pub delta: DMatrix<f64>,
}

/// Baseline law plus one or more anomalous windows over a horizon `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScenario {
    base: VarParams,
    episodes: Vec<Episode>,
    anomalous: Vec<VarParams>,
    horizon: usize,
    burn_in: usize,
}

impl AnomalyScenario {
    /// Single-window scenario; `delta` must be nonzero.
    pub fn new(base: VarParams, delta: DMatrix<f64>, window: Interval, horizon: usize, burn_in: usize) -> Result<Self> {
        Self::with_episodes(base, vec![Episode { window, delta }], horizon, burn_in)
    }

    /// Several disjoint windows, each with its own change; all changes nonzero.
    pub fn with_episodes(base: VarParams, episodes: Vec<Episode>, horizon: usize, burn_in: usize) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::Scenario("at least one episode required".into()));
        }
        if let Some(e) = episodes.iter().find(|e| e.delta.iter().all(|v| *v == 0.0)) {
            return Err(Error::Scenario(format!(
                "change on window {} is zero; use AnomalyScenario::null for null scenarios",
                e.window
            )));
        }
        Self::build(base, episodes, horizon, burn_in)
    }

    /// Scenario with a marked window but no change in coefficients.
    pub fn null(base: VarParams, window: Interval, horizon: usize, burn_in: usize) -> Result<Self> {
        let p = base.dim();
        let delta = DMatrix::zeros(p, p * base.order());
        Self::build(base, vec![Episode { window, delta }], horizon, burn_in)
    }

    fn build(base: VarParams, mut episodes: Vec<Episode>, horizon: usize, burn_in: usize) -> Result<Self> {
        let p = base.dim();
        let q = base.order();
        episodes.sort_by_key(|e| e.window.start);
        for e in &episodes {
            let (s, t) = (e.window.start, e.window.end);
            if !(0 < s && s < t && t < horizon) {
                return Err(Error::Scenario(format!(
                    "window {} must satisfy 0 < start < end < T = {horizon}",
                    e.window
                )));
            }
            if e.delta.nrows() != p || e.delta.ncols() != p * q {
                return Err(Error::Scenario(format!(
                    "change matrix is {}x{}, expected {p}x{}",
                    e.delta.nrows(),
                    e.delta.ncols(),
                    p * q
                )));
            }
        }
        if let Some(w) = episodes.windows(2).find(|w| w[0].window.intersects(&w[1].window)) {
            return Err(Error::Scenario(format!(
                "windows {} and {} overlap",
                w[0].window, w[1].window
            )));
        }
        let stacked = base.stacked();
        let anomalous = episodes
            .iter()
            .map(|e| {
                VarParams::from_stacked(&(&stacked + &e.delta), q, base.noise_cov().clone())
                    .map_err(|err| Error::Scenario(format!("anomalous law on {}: {err}", e.window)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base,
            episodes,
            anomalous,
            horizon,
            burn_in,
        })
    }

    pub fn base(&self) -> &VarParams {
        &self.base
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn windows(&self) -> Vec<Interval> {
        self.episodes.iter().map(|e| e.window).collect()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn is_null(&self) -> bool {
        self.episodes.iter().all(|e| e.delta.iter().all(|v| *v == 0.0))
    }

    /// `‖Θ‖₀` summed over episodes.
    pub fn change_sparsity(&self) -> usize {
        self.episodes
            .iter()
            .map(|e| e.delta.iter().filter(|v| **v != 0.0).count())
            .sum()
    }

    /// Law in force at 1-based time `t` (burn-in times are `<= 0`).
    pub fn law_at(&self, t: isize) -> &VarParams {
        for (e, law) in self.episodes.iter().zip(&self.anomalous) {
            if t >= e.window.start as isize && t <= e.window.end as isize {
                return law;
            }
        }
        &self.base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> VarParams {
        VarParams::var1(DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.2])).unwrap()
    }

    #[test]
    fn window_must_end_before_horizon() {
        let delta = DMatrix::from_element(2, 2, 0.1);
        let err = AnomalyScenario::new(base(), delta, Interval::new(10, 50).unwrap(), 50, 0).unwrap_err();
        assert!(matches!(err, Error::Scenario(_)));
    }

    #[test]
    fn zero_change_needs_null_constructor() {
        let w = Interval::new(10, 20).unwrap();
        assert!(AnomalyScenario::new(base(), DMatrix::zeros(2, 2), w, 50, 0).is_err());
        let s = AnomalyScenario::null(base(), w, 50, 0).unwrap();
        assert!(s.is_null());
    }

    #[test]
    fn anomalous_law_must_be_stationary() {
        let delta = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.0]);
        let err = AnomalyScenario::new(base(), delta, Interval::new(10, 20).unwrap(), 50, 0).unwrap_err();
        assert!(matches!(err, Error::Scenario(_)));
    }

    #[test]
    fn law_switches_on_closed_window() {
        let delta = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.0]);
        let s = AnomalyScenario::new(base(), delta, Interval::new(10, 20).unwrap(), 50, 0).unwrap();
        assert_eq!(s.law_at(9).coeffs()[0][(0, 0)], 0.3);
        assert!((s.law_at(10).coeffs()[0][(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.law_at(20).coeffs()[0][(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(s.law_at(21).coeffs()[0][(0, 0)], 0.3);
        assert_eq!(s.change_sparsity(), 1);
    }

    #[test]
    fn overlapping_episodes_rejected() {
        let d = DMatrix::from_element(2, 2, 0.05);
        let eps = vec![
            Episode {
                window: Interval::new(10, 20).unwrap(),
                delta: d.clone(),
            },
            Episode {
                window: Interval::new(20, 30).unwrap(),
                delta: d,
            },
        ];
        assert!(AnomalyScenario::with_episodes(base(), eps, 50, 0).is_err());
    }
}
