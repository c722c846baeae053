use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};

/// How a single matching X_t is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MatchingScheme {
    /// Uniform random injection of rows into columns.
    OneToOne,
    /// Row i takes Bin(k, p0) distinct columns; columns used at most once.
    OneToMany { k: usize, p0: f64 },
    /// Both sides arrive at random with truncated-binomial counts; arrived
    /// rows and columns are matched one-to-one.
    TwoSided {
        p1: f64,
        p2: f64,
        c_r: f64,
        c_s: f64,
        gamma: f64,
    },
}

impl MatchingScheme {
    /// Short lowercase label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            MatchingScheme::OneToOne => "one_to_one",
            MatchingScheme::OneToMany { .. } => "one_to_many",
            MatchingScheme::TwoSided { .. } => "two_sided",
        }
    }

    /// Parameter ranges and capacity feasibility for a d1×d2 market.
    /// Emptiness of the two-sided truncation region is checked separately by
    /// the truncated-binomial sampler.
    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        ensure_arg!(d1 >= 1 && d2 >= 1, "empty market {d1}x{d2}");
        match *self {
            MatchingScheme::OneToOne => {
                ensure_arg!(d2 >= d1, "one-to-one needs d2 >= d1, got {d1}x{d2}");
            }
            MatchingScheme::OneToMany { k, p0 } => {
                ensure_arg!(k >= 1, "one-to-many needs K >= 1");
                ensure_arg!(p0 > 0.0 && p0 <= 1.0, "p0 must lie in (0, 1], got {p0}");
                ensure_arg!(d2 >= k * d1, "one-to-many needs d2 >= K*d1, got d2={d2}, K*d1={}", k * d1);
            }
            MatchingScheme::TwoSided { p1, p2, c_r, c_s, gamma } => {
                ensure_arg!(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0, "arrival probabilities must lie in (0, 1)");
                ensure_arg!((0.0..1.0).contains(&c_r) && (0.0..1.0).contains(&c_s), "c_r, c_s must lie in [0, 1)");
                ensure_arg!(gamma >= 0.0 && gamma.is_finite(), "gamma must be nonnegative");
                if c_r == 0.0 || c_s == 0.0 || gamma == 0.0 {
                    log::warn!("two-sided scheme with c_r={c_r}, c_s={c_s}, gamma={gamma} is outside the truncated regime covered by theory");
                }
            }
        }
        Ok(())
    }
}
