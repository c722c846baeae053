//! Rotation-calibrated gradient descent on Grassmannians with sample
//! splitting, producing the initial estimate M̂ = ÛĜV̂ᵀ.
//!
//! The observations are cut into 2m equal consecutive batches D₁..D₂ₘ.
//! D₁ seeds the factors by a scaled spectral step and D₂ fits the core; the
//! p-th gradient step then reads D₂ₚ₊₁ and the refit after it reads D₂ₚ₊₂,
//! so every batch is consumed exactly once.

mod objective;
mod rank;
mod trace;

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};
use crate::matmodel::{orthonormality_error, svd_r, RewardMatrix, TruncatedSvd};
use crate::samplers::{MatchingScheme, Observation, ObservationBatch};

pub use objective::{loss, loss_at, loss_gradient, loss_gradient_at, solve_g};
pub use rank::{estimate_rank, RankChoice};
pub use trace::{FitTrace, TraceRow};

/// Step size fixed by the convergence guarantees for the non-uniform schemes.
pub const DEFAULT_ETA: f64 = 0.75;
/// Relative singular-value floor for the core matrix and its design.
pub const DEFAULT_MIN_G_SINGULAR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub r: usize,
    pub eta: f64,
    pub m: usize,
    pub nu: f64,
    #[serde(default)]
    pub record_trace: bool,
    #[serde(default = "default_min_g")]
    pub min_g_singular: f64,
}

fn default_min_g() -> f64 {
    DEFAULT_MIN_G_SINGULAR
}

impl EstimatorConfig {
    pub fn new(r: usize, m: usize, nu: f64) -> Self {
        EstimatorConfig {
            r,
            eta: DEFAULT_ETA,
            m,
            nu,
            record_trace: false,
            min_g_singular: DEFAULT_MIN_G_SINGULAR,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.r >= 1, "rank must be positive");
        ensure_arg!(self.m >= 1, "need at least one batch pair");
        ensure_arg!(self.eta > 0.0 && self.eta < 1.0, "step size must lie in (0, 1), got {}", self.eta);
        ensure_arg!(self.nu > 0.0 && self.nu <= 1.0, "nu must lie in (0, 1], got {}", self.nu);
        ensure_arg!(self.min_g_singular > 0.0, "min_g_singular must be positive");
        Ok(())
    }
}

/// m = ⌈log d₂⌉, the batch count suggested by the error analysis with its
/// constant set to one.
pub fn theory_batch_count(d2: usize) -> usize {
    ((d2 as f64).ln().ceil() as usize).max(1)
}

/// The 2m sample-splitting batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub ranges: Vec<Range<usize>>,
    /// Trailing observations left out because T is not a multiple of 2m.
    pub dropped: usize,
}

impl Partition {
    pub fn batch_size(&self) -> usize {
        self.ranges.first().map_or(0, |r| r.len())
    }
}

/// Splits 0..T into 2m contiguous ranges of ⌊T/(2m)⌋.
pub fn partition_batches(t: usize, m: usize) -> Result<Partition> {
    ensure_arg!(m >= 1, "need at least one batch pair");
    ensure_arg!(t >= 2 * m, "T={t} is smaller than 2m={}", 2 * m);
    let n0 = t / (2 * m);
    let ranges = (0..2 * m).map(|p| p * n0..(p + 1) * n0).collect();
    let dropped = t - 2 * m * n0;
    if dropped > 0 {
        log::warn!("dropping {dropped} trailing observations: T={t} is not a multiple of 2m={}", 2 * m);
    }
    Ok(Partition { ranges, dropped })
}

/// Σ_t Y_t∘X_t as a dense matrix.
pub fn aggregate(obs: &[Observation], d1: usize, d2: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(d1, d2);
    for rec in obs {
        for (i, j, y) in rec.entries() {
            acc[(i, j)] += y;
        }
    }
    acc
}

/// Top-r factors of (ν N₀)⁻¹ Σ_t Y_t∘X_t over one batch.
pub fn spectral_init(
    obs: &[Observation],
    d1: usize,
    d2: usize,
    nu: f64,
    r: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure_arg!(!obs.is_empty(), "spectral initialization needs a nonempty batch");
    ensure_arg!(nu > 0.0, "nu must be positive");
    let mut agg = aggregate(obs, d1, d2);
    if agg.iter().all(|x| *x == 0.0) {
        return Err(Error::DegenerateInit);
    }
    agg /= nu * obs.len() as f64;
    let t = svd_r(&agg, r)?;
    Ok((t.u, t.v))
}

/// Iterate (Û, Ĝ, V̂) with the SVD of Ĝ used for rotation calibration.
#[derive(Debug, Clone)]
pub struct FactorState {
    pub u: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub g_svd: TruncatedSvd,
}

impl FactorState {
    /// Fails with [`Error::SingularCore`] when σ_min(G)/σ_max(G) < `min_rel`.
    pub fn new(u: DMatrix<f64>, g: DMatrix<f64>, v: DMatrix<f64>, min_rel: f64) -> Result<Self> {
        let r = g.nrows();
        let g_svd = svd_r(&g, r)?;
        let top = g_svd.sigma[0];
        let ratio = if top > 0.0 { g_svd.sigma[r - 1] / top } else { 0.0 };
        if !(ratio >= min_rel) {
            return Err(Error::SingularCore { ratio });
        }
        Ok(FactorState { u, g, v, g_svd })
    }

    /// ÛĜV̂ᵀ.
    pub fn estimate(&self) -> DMatrix<f64> {
        &self.u * &self.g * self.v.transpose()
    }

    /// Ĝ⁻¹ = R_G Λ_G⁻¹ L_Gᵀ.
    fn g_inverse(&self) -> DMatrix<f64> {
        let mut right = self.g_svd.v.clone();
        for (k, s) in self.g_svd.sigma.iter().enumerate() {
            right.column_mut(k).unscale_mut(*s);
        }
        right * self.g_svd.u.transpose()
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.u).max(orthonormality_error(&self.v))
    }
}

/// Output of one step: the next state and ‖∂L/∂M‖_F on the step batch.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FactorState,
    pub grad_norm: f64,
}

/// One rotation-calibrated gradient step on `step_obs`, followed by the
/// retraction and a core refit on `refit_obs`.
pub fn gradient_step(
    state: &FactorState,
    step_obs: &[Observation],
    refit_obs: &[Observation],
    eta: f64,
    nu: f64,
    min_rel: f64,
) -> Result<StepOutcome> {
    ensure_arg!(!step_obs.is_empty() && !refit_obs.is_empty(), "gradient step needs nonempty batches");
    let n0 = step_obs.len() as f64;
    let grad = loss_gradient(&state.u, &state.g, &state.v, step_obs);
    let coef = eta / (2.0 * n0 * nu);
    let g_inv = state.g_inverse();

    let u_half = (&state.u - (&grad * &state.v * &g_inv) * coef) * &state.g_svd.u;
    let v_half = (&state.v - (grad.transpose() * &state.u * g_inv.transpose()) * coef) * &state.g_svd.v;
    let u = svd_r(&u_half, u_half.ncols())?.u;
    let v = svd_r(&v_half, v_half.ncols())?.u;
    let g = solve_g(&u, &v, refit_obs, min_rel)?;
    let next = FactorState::new(u, g, v, min_rel)?;
    debug_assert!(next.orthonormality_error() <= 1e-8);
    Ok(StepOutcome { state: next, grad_norm: grad.norm() })
}

/// Result of running the estimator on one dataset.
#[derive(Debug, Clone)]
pub struct Fit {
    pub m_init: DMatrix<f64>,
    pub state: FactorState,
    pub trace: Option<FitTrace>,
    pub dropped: usize,
}

/// Runs the full estimator on `obs`. The trace is recorded when
/// `config.record_trace` is set or `truth` is given; the relative error
/// column needs `truth`. Failures carry the 1-based batch index.
pub fn fit(
    obs: &[Observation],
    dims: (usize, usize),
    config: &EstimatorConfig,
    truth: Option<&RewardMatrix>,
) -> Result<Fit> {
    config.validate()?;
    let (d1, d2) = dims;
    ensure_arg!(config.r <= d1.min(d2), "rank {} exceeds min(d1, d2)", config.r);
    if let Some(m) = truth {
        ensure_arg!(m.dims() == dims, "truth dims differ from data dims");
    }
    let part = partition_batches(obs.len(), config.m)?;
    let batch = |k: usize| &obs[part.ranges[k].clone()];
    let min_rel = config.min_g_singular;

    let mut trace = (config.record_trace || truth.is_some()).then(FitTrace::default);
    let record = |p: usize, st: &FactorState, grad_norm: Option<f64>, trace: &mut Option<FitTrace>| {
        if let Some(tr) = trace.as_mut() {
            tr.rows.push(TraceRow::new(p, st, grad_norm, truth));
        }
    };

    let mut state = (|| {
        let (u, v) = spectral_init(batch(0), d1, d2, config.nu, config.r)?;
        let g = solve_g(&u, &v, batch(1), min_rel)?;
        FactorState::new(u, g, v, min_rel)
    })()
    .map_err(|e| e.at_batch(1))?;
    record(1, &state, None, &mut trace);

    for p in 1..config.m {
        let out = gradient_step(&state, batch(2 * p), batch(2 * p + 1), config.eta, config.nu, min_rel)
            .map_err(|e| e.at_batch(p + 1))?;
        state = out.state;
        record(p + 1, &state, Some(out.grad_norm), &mut trace);
    }

    Ok(Fit { m_init: state.estimate(), state, trace, dropped: part.dropped })
}

/// [`fit`] on a whole batch, checking that `config.nu` agrees with the
/// batch's scheme where ν has a closed form.
pub fn fit_batch(batch: &ObservationBatch, config: &EstimatorConfig, truth: Option<&RewardMatrix>) -> Result<Fit> {
    let exact = match batch.scheme {
        MatchingScheme::OneToOne => Some(1.0 / batch.d2 as f64),
        MatchingScheme::OneToMany { k, p0 } => Some(k as f64 * p0 / batch.d2 as f64),
        MatchingScheme::TwoSided { .. } => None,
    };
    if let Some(nu) = exact {
        ensure_arg!(
            (config.nu - nu).abs() <= 1e-12 * nu,
            "config nu={} does not match the batch scheme's nu={nu}",
            config.nu
        );
    }
    fit(&batch.records, batch.dims(), config, truth)
}
