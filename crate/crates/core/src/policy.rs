//! One-to-one policy search and evaluation.
//!
//! [`optimal_one_to_one`] solves the rectangular assignment problem
//! max Σᵢ M(i, π(i)) over injections π: [d₁] → [d₂] with a shortest
//! augmenting path Hungarian solver. Among optimal injections the
//! lexicographically smallest pair list is returned.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};
use crate::inference::{InferenceArtifacts, InferenceResult};
use crate::matmodel::LinearForm;
use crate::samplers::Matching;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub matching: Matching,
    pub total_reward_estimate: f64,
    pub inference: InferenceResult,
}

/// Minimum-cost assignment of every row of `cost` (n × m, n ≤ m) to a
/// distinct column. Returns the column of each row and the dual potentials
/// (u, v) with u_i + v_j ≤ c_ij, equality on assigned pairs, v ≤ 0 and
/// v_j = 0 on unassigned columns.
fn hungarian(cost: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let (n, m) = cost.shape();
    debug_assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) assigned to column j; way[j]: previous column on the path.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}

/// Best total reward for `rows` matched injectively into `cols`.
fn best_value(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let cost = DMatrix::from_fn(rows.len(), cols.len(), |a, b| -m[(rows[a], cols[b])]);
    let (assign, _, _) = hungarian(&cost);
    rows.iter().zip(&assign).map(|(&i, &b)| m[(i, cols[b])]).sum()
}

/// The reward-maximizing one-to-one matching of `m_hat`; ties resolve to the
/// lexicographically smallest pair list.
pub fn optimal_one_to_one(m_hat: &DMatrix<f64>) -> Result<Matching> {
    let (d1, d2) = m_hat.shape();
    ensure_arg!(d1 <= d2, "one-to-one matching needs d1 <= d2, got {d1}x{d2}");
    ensure_arg!(m_hat.iter().all(|x| x.is_finite()), "reward matrix has non-finite entries");
    if d1 == 0 {
        return Ok(Matching { d1, d2, pairs: Vec::new() });
    }

    let (assign, u, v) = hungarian(&(-m_hat));
    let best: f64 = assign.iter().enumerate().map(|(i, &j)| m_hat[(i, j)]).sum();
    let scale = m_hat.amax().max(1.0) * d1 as f64;
    let tol = 1e-10 * scale;

    // Every optimal injection uses only tight edges and every column with a
    // strictly negative potential, so tight edges are the only candidates.
    let tight = |i: usize, j: usize| -m_hat[(i, j)] - u[i] - v[j] <= tol;
    let required: Vec<bool> = v.iter().map(|&vj| vj < -tol).collect();

    let mut pairs = Vec::with_capacity(d1);
    let mut free: Vec<usize> = (0..d2).collect();
    let mut fixed = 0.0;
    for i in 0..d1 {
        let rest: Vec<usize> = (i + 1..d1).collect();
        let mut chosen = None;
        for (pos, &j) in free.iter().enumerate() {
            if !tight(i, j) {
                continue;
            }
            if assign[i] == j && pairs.iter().zip(0..).all(|(&(_, pj), k)| pj == assign[k]) {
                chosen = Some(pos);
                break;
            }
            let mut cols = free.clone();
            cols.remove(pos);
            let need_left = cols.iter().filter(|&&c| required[c]).count();
            if need_left > rest.len() {
                continue;
            }
            let total = fixed + m_hat[(i, j)] + best_value(m_hat, &rest, &cols);
            if total >= best - tol {
                chosen = Some(pos);
                break;
            }
        }
        let pos = chosen.unwrap_or_else(|| free.iter().position(|&c| c == assign[i]).expect("assigned column free"));
        let j = free.remove(pos);
        fixed += m_hat[(i, j)];
        pairs.push((i, j));
    }
    Ok(Matching { d1, d2, pairs })
}

/// Indicator form Σ e_i e_jᵀ over the matched pairs.
pub fn matching_to_linear_form(matching: &Matching) -> Result<LinearForm> {
    LinearForm::indicator(matching.d1, matching.d2, &matching.pairs)
}

/// Point estimate, interval and two-sided test for the total reward of
/// `matching`.
pub fn evaluate_policy(artifacts: &InferenceArtifacts, matching: &Matching, alpha: f64) -> Result<PolicyEvaluation> {
    let q = matching_to_linear_form(matching)?;
    let inference = artifacts.infer(&q, alpha)?;
    Ok(PolicyEvaluation { matching: matching.clone(), total_reward_estimate: inference.point, inference })
}
