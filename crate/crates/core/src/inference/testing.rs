//! Intervals, tests, and the per-form inference record.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};
use crate::matmodel::{LinearForm, Triplet};
use crate::stats::{normal_cdf, normal_quantile, normal_sf};

/// Levels reported in [`TestOutcome::reject_at`].
pub const REPORT_LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

/// Alternative hypothesis relative to v₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// H₁: ⟨M, Q⟩ > v₀.
    Greater,
    /// H₁: ⟨M, Q⟩ < v₀.
    Less,
    TwoSided,
}

/// point ± z_{α/2}·se with z_α = Φ⁻¹(1 − α).
pub fn confidence_interval(point: f64, se: f64, alpha: f64) -> Result<(f64, f64)> {
    ensure_arg!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1), got {alpha}");
    ensure_arg!(se >= 0.0, "standard error must be nonnegative");
    let half = normal_quantile(1.0 - alpha / 2.0) * se;
    Ok((point - half, point + half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub z: f64,
    pub p_value: f64,
    /// (α, rejected) for each level in [`REPORT_LEVELS`].
    pub reject_at: Vec<(f64, bool)>,
}

/// z = (point − v₀)/se and its p-value under `direction`.
pub fn test_threshold(point: f64, se: f64, v0: f64, direction: Direction) -> Result<TestOutcome> {
    if !(se > 0.0) {
        return Err(Error::DegenerateTest(format!("standard error is {se}")));
    }
    let z = (point - v0) / se;
    let p_value = match direction {
        Direction::Greater => normal_sf(z),
        Direction::Less => normal_cdf(z),
        Direction::TwoSided => (2.0 * normal_sf(z.abs())).min(1.0),
    };
    let reject_at = REPORT_LEVELS.iter().map(|&a| (a, p_value <= a)).collect();
    Ok(TestOutcome { z, p_value, reject_at })
}

/// Where an inference result came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub scheme: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub nu: f64,
    pub nu_mc_se: Option<f64>,
}

/// Estimate, uncertainty, and test for one linear form ⟨M, Q⟩.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub q: Vec<Triplet>,
    pub point: f64,
    pub sigma_hat_sq: f64,
    pub proj_mag_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Test statistic against `v0`; absent when se = 0.
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub v0: f64,
    pub direction: Direction,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl InferenceResult {
    pub fn linear_form(&self, d1: usize, d2: usize) -> Result<LinearForm> {
        LinearForm::new(d1, d2, self.q.iter().copied())
    }

    /// Closed-interval coverage check.
    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }

    /// (point − truth)/se.
    pub fn standardized(&self, truth: f64) -> f64 {
        (self.point - truth) / self.se
    }
}
