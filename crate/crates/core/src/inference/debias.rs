//! Cross-sample debiasing and rank-r projection.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};
use crate::matmodel::svd_r;
use crate::samplers::Observation;

/// Which half of the data an initial estimate was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    /// Observations T₀..2T₀.
    First,
    /// Observations 0..T₀.
    Second,
}

/// The two halves used for cross-fitting. Both are 0-based ranges into the
/// observation sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub half1: Range<usize>,
    pub half2: Range<usize>,
    pub t0: usize,
    pub dropped: usize,
}

/// half1 = T₀..2T₀, half2 = 0..T₀ with T₀ = ⌊T/2⌋; no shuffling.
pub fn split(t: usize) -> Result<SplitPlan> {
    ensure_arg!(t >= 2, "need at least two observations to split, got {t}");
    let t0 = t / 2;
    let dropped = t - 2 * t0;
    if dropped > 0 {
        log::warn!("odd T={t}: dropping the last observation");
    }
    Ok(SplitPlan { half1: t0..2 * t0, half2: 0..t0, t0, dropped })
}

/// An unbiased (generally full-rank) estimate of M.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedEstimate {
    pub m_unbs: DMatrix<f64>,
    pub source_init: Option<Half>,
    pub nu_used: f64,
}

fn debias_weighted(
    m_init: &DMatrix<f64>,
    other_half: &[Observation],
    weight: impl Fn(usize, usize) -> f64,
) -> Result<DMatrix<f64>> {
    ensure_arg!(!other_half.is_empty(), "debiasing needs a nonempty held-out half");
    let mut resid = DMatrix::<f64>::zeros(m_init.nrows(), m_init.ncols());
    for (i, j, y) in other_half.iter().flat_map(|r| r.entries()) {
        ensure_arg!(i < m_init.nrows() && j < m_init.ncols(), "observation ({i}, {j}) outside the estimate");
        resid[(i, j)] += y - m_init[(i, j)];
    }
    let t0 = other_half.len() as f64;
    let mut out = m_init.clone();
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            let r = resid[(i, j)];
            if r != 0.0 {
                out[(i, j)] += r * weight(i, j) / t0;
            }
        }
    }
    Ok(out)
}

/// M̂^unbs = M̂^init + (T₀ν)⁻¹ Σ_t (Y_t − X_t∘M̂^init) over the held-out half.
pub fn debias(m_init: &DMatrix<f64>, other_half: &[Observation], nu: f64) -> Result<DebiasedEstimate> {
    ensure_arg!(nu > 0.0, "nu must be positive");
    let w = 1.0 / nu;
    Ok(DebiasedEstimate {
        m_unbs: debias_weighted(m_init, other_half, |_, _| w)?,
        source_init: None,
        nu_used: nu,
    })
}

/// Inverse-propensity version: the residual sum is weighted entrywise by
/// `p_inv` (reciprocal reveal probabilities) instead of 1/ν.
pub fn debias_ipw(m_init: &DMatrix<f64>, other_half: &[Observation], p_inv: &DMatrix<f64>) -> Result<DebiasedEstimate> {
    ensure_arg!(p_inv.shape() == m_init.shape(), "propensity matrix shape differs from the estimate");
    ensure_arg!(
        p_inv.iter().all(|p| p.is_finite() && *p > 0.0),
        "inverse propensities must be positive and finite"
    );
    if p_inv.iter().any(|p| *p < 1.0) {
        log::warn!("inverse propensity below 1 implies a reveal probability above 1");
    }
    // effective ν: harmonic summary of the propensities
    let nu_used = p_inv.len() as f64 / p_inv.sum();
    Ok(DebiasedEstimate {
        m_unbs: debias_weighted(m_init, other_half, |i, j| p_inv[(i, j)])?,
        source_init: None,
        nu_used,
    })
}

/// Best rank-r approximation ÛÛᵀ A V̂V̂ᵀ with its factors.
#[derive(Debug, Clone)]
pub struct RankProjection {
    pub m: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub degenerate: bool,
}

pub fn project_rank_r(m_unbs: &DMatrix<f64>, r: usize) -> Result<RankProjection> {
    let t = svd_r(m_unbs, r)?;
    Ok(RankProjection { m: t.reconstruct(), degenerate: t.degenerate, u: t.u, v: t.v })
}
