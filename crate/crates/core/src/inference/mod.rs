//! Cross-fitted debiasing, rank-r projection, and inference on linear forms
//! ⟨M, Q⟩.
//!
//! The observations are halved; the estimator runs on each half, each fit
//! is debiased with the residuals of the *other* half, projected back to
//! rank r, and the two projections are averaged into M̂. Standard errors
//! use σ̂ from the cross residuals and ‖P_M̂(Q)‖_F from the top-r factors of
//! M̂.

mod debias;
mod testing;
mod variance;

use nalgebra::DMatrix;

use crate::error::{ensure_arg, Error, Result};
use crate::estimator::{fit, EstimatorConfig, Fit};
use crate::matmodel::{projection_magnitude, svd_r, LinearForm, RewardMatrix};
use crate::samplers::{Observation, ObservationBatch};

pub use debias::{debias, debias_ipw, project_rank_r, split, DebiasedEstimate, Half, RankProjection, SplitPlan};
pub use testing::{
    confidence_interval, test_threshold, Direction, InferenceResult, Provenance, TestOutcome, REPORT_LEVELS,
};
pub use variance::{estimate_sigma, standard_error, SigmaEstimate};

/// Everything the linear-form inference needs, plus the per-half
/// intermediates for diagnostics.
#[derive(Debug, Clone)]
pub struct InferenceArtifacts {
    pub dims: (usize, usize),
    pub r: usize,
    pub plan: SplitPlan,
    /// Fits on half1 (D̃₁) and half2 (D̃₂).
    pub fits: [Fit; 2],
    pub halves: [DebiasedEstimate; 2],
    pub projections: [RankProjection; 2],
    pub m_hat: DMatrix<f64>,
    pub u_hat: DMatrix<f64>,
    pub v_hat: DMatrix<f64>,
    pub sigma: SigmaEstimate,
    pub nu: f64,
    pub provenance: Option<Provenance>,
}

impl InferenceArtifacts {
    /// 2T₀, the sample size entering the standard error.
    pub fn t_used(&self) -> usize {
        2 * self.plan.t0
    }

    pub fn sigma_hat_sq(&self) -> f64 {
        self.sigma.sigma_sq
    }

    /// ‖P_M̂(Q)‖_F.
    pub fn projection_magnitude(&self, q: &LinearForm) -> Result<f64> {
        projection_magnitude(&self.u_hat, &self.v_hat, q)
    }

    pub fn standard_error(&self, q: &LinearForm) -> Result<f64> {
        Ok(standard_error(self.sigma.sigma_sq, self.projection_magnitude(q)?, self.t_used(), self.nu))
    }

    /// Estimate and (1 − α) interval for ⟨M, Q⟩ with a two-sided test of
    /// ⟨M, Q⟩ = 0.
    pub fn infer(&self, q: &LinearForm, alpha: f64) -> Result<InferenceResult> {
        self.infer_against(q, alpha, 0.0, Direction::TwoSided)
    }

    /// As [`Self::infer`], testing ⟨M, Q⟩ against `v0` in `direction`.
    pub fn infer_against(&self, q: &LinearForm, alpha: f64, v0: f64, direction: Direction) -> Result<InferenceResult> {
        ensure_arg!(q.dims() == self.dims, "linear form dims {:?} differ from {:?}", q.dims(), self.dims);
        let point = q.inner(&self.m_hat);
        let proj = self.projection_magnitude(q)?;
        let se = standard_error(self.sigma.sigma_sq, proj, self.t_used(), self.nu);
        let (ci_low, ci_high) = confidence_interval(point, se, alpha)?;
        let (z, p_value) = match test_threshold(point, se, v0, direction) {
            Ok(t) => (Some(t.z), Some(t.p_value)),
            Err(Error::DegenerateTest(_)) => (None, None),
            Err(e) => return Err(e),
        };
        Ok(InferenceResult {
            q: q.entries().to_vec(),
            point,
            sigma_hat_sq: self.sigma.sigma_sq,
            proj_mag_hat: proj,
            se,
            ci_low,
            ci_high,
            z,
            p_value,
            v0,
            direction,
            alpha,
            provenance: self.provenance.clone(),
        })
    }
}

/// The full pipeline on raw records. `config.m` applies within each half.
/// `truth`, when given, is only used to fill the fit traces.
pub fn estimate_records(
    records: &[Observation],
    dims: (usize, usize),
    config: &EstimatorConfig,
    truth: Option<&RewardMatrix>,
) -> Result<InferenceArtifacts> {
    let plan = split(records.len())?;
    let d1_half = &records[plan.half1.clone()];
    let d2_half = &records[plan.half2.clone()];

    let (fit1, fit2) = rayon::join(
        || fit(d1_half, dims, config, truth),
        || fit(d2_half, dims, config, truth),
    );
    let (fit1, fit2) = (fit1?, fit2?);

    let mut unbs1 = debias(&fit1.m_init, d2_half, config.nu)?;
    unbs1.source_init = Some(Half::First);
    let mut unbs2 = debias(&fit2.m_init, d1_half, config.nu)?;
    unbs2.source_init = Some(Half::Second);

    let p1 = project_rank_r(&unbs1.m_unbs, config.r)?;
    let p2 = project_rank_r(&unbs2.m_unbs, config.r)?;
    let m_hat = (&p1.m + &p2.m) * 0.5;
    let top = svd_r(&m_hat, config.r)?;
    let sigma = estimate_sigma(&fit1.m_init, &fit2.m_init, d1_half, d2_half, 2 * plan.t0)?;

    Ok(InferenceArtifacts {
        dims,
        r: config.r,
        plan,
        fits: [fit1, fit2],
        halves: [unbs1, unbs2],
        projections: [p1, p2],
        m_hat,
        u_hat: top.u,
        v_hat: top.v,
        sigma,
        nu: config.nu,
        provenance: None,
    })
}

/// [`estimate_records`] on a batch, recording provenance.
pub fn combine_and_estimate(batch: &ObservationBatch, config: &EstimatorConfig) -> Result<InferenceArtifacts> {
    let mut out = estimate_records(&batch.records, batch.dims(), config, None)?;
    out.provenance = Some(Provenance {
        seed: batch.seed,
        scheme: batch.scheme.label().to_string(),
        t: out.t_used(),
        nu: config.nu,
        nu_mc_se: None,
    });
    Ok(out)
}

/// Two-sided test of ⟨M, Q₁ − Q₂⟩ = 0.
pub fn compare_matchings(
    artifacts: &InferenceArtifacts,
    q1: &LinearForm,
    q2: &LinearForm,
    alpha: f64,
) -> Result<InferenceResult> {
    let q = q1.sub(q2)?;
    if q.is_zero() {
        return Err(Error::DegenerateTest("the two forms are identical".into()));
    }
    artifacts.infer(&q, alpha)
}
