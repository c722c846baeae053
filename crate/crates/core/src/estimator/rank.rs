use serde::Serialize;

use crate::error::{ensure_arg, Result};

/// Minimum consecutive singular-value ratio accepted as a scree elbow.
pub const ELBOW_RATIO: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankChoice {
    pub rank: usize,
    /// False when no ratio reached [`ELBOW_RATIO`] and `max_rank` was
    /// returned as the conservative (larger) choice.
    pub elbow: bool,
}

/// Scree-plot elbow: the k ≤ max_rank maximizing Λ_k/Λ_{k+1}, provided the
/// ratio is at least 3; otherwise max_rank, flagged.
pub fn estimate_rank(singular_values: &[f64], max_rank: usize) -> Result<RankChoice> {
    ensure_arg!(!singular_values.is_empty(), "empty spectrum");
    ensure_arg!(max_rank >= 1, "max_rank must be positive");
    let max_rank = max_rank.min(singular_values.len());
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=max_rank {
        let Some(&next) = singular_values.get(k) else { break };
        let cur = singular_values[k - 1];
        let ratio = if next > 0.0 { cur / next } else if cur > 0.0 { f64::INFINITY } else { 1.0 };
        if best.is_none_or(|(_, b)| ratio > b) {
            best = Some((k, ratio));
        }
    }
    match best {
        Some((k, ratio)) if ratio >= ELBOW_RATIO => Ok(RankChoice { rank: k, elbow: true }),
        _ => {
            log::warn!("no clear scree elbow up to rank {max_rank}; choosing the larger rank");
            Ok(RankChoice { rank: max_rank, elbow: false })
        }
    }
}
