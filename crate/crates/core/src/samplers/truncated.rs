//! Bivariate truncated binomial arrival counts.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Consecutive rejections after which the region is declared infeasible.
pub const MAX_REJECTIONS: usize = 1_000_000;

/// Parameters of tBin_{c_r, c_s, γ}(d₁, p₁, d₂, p₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedBinomial {
    pub d1: usize,
    pub p1: f64,
    pub d2: usize,
    pub p2: f64,
    pub c_r: f64,
    pub c_s: f64,
    pub gamma: f64,
}

impl TruncatedBinomial {
    /// k₁ ≥ c_r d₁, k₂ ≥ c_s d₂, and the counts are separated by a factor 1+γ.
    pub fn contains(&self, k1: usize, k2: usize) -> bool {
        let (a, b) = (k1 as f64, k2 as f64);
        a >= self.c_r * self.d1 as f64
            && b >= self.c_s * self.d2 as f64
            && (a >= (1.0 + self.gamma) * b || b >= (1.0 + self.gamma) * a)
    }

    /// Whether any support point of the product binomial lies in the region.
    pub fn region_nonempty(&self) -> bool {
        (0..=self.d1).any(|k1| (0..=self.d2).any(|k2| self.contains(k1, k2)))
    }

    /// Rejection sampling from independent Bin(d₁, p₁) ⊗ Bin(d₂, p₂).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize)> {
        if !self.region_nonempty() {
            return Err(Error::InfeasibleTruncation(format!(
                "no (k1, k2) satisfies the truncation for d1={}, d2={}, c_r={}, c_s={}, gamma={}",
                self.d1, self.d2, self.c_r, self.c_s, self.gamma
            )));
        }
        let rows = Binomial::new(self.d1 as u64, self.p1)
            .map_err(|e| Error::InvalidArgument(format!("row arrivals: {e}")))?;
        let cols = Binomial::new(self.d2 as u64, self.p2)
            .map_err(|e| Error::InvalidArgument(format!("column arrivals: {e}")))?;
        for _ in 0..MAX_REJECTIONS {
            let k1 = rows.sample(rng) as usize;
            let k2 = cols.sample(rng) as usize;
            if self.contains(k1, k2) {
                return Ok((k1, k2));
            }
        }
        Err(Error::InfeasibleTruncation(format!(
            "{MAX_REJECTIONS} consecutive rejections"
        )))
    }
}

/// Free-function form of [`TruncatedBinomial::sample`].
#[allow(clippy::too_many_arguments)]
pub fn sample_truncated_binomial<R: Rng + ?Sized>(
    d1: usize,
    p1: f64,
    d2: usize,
    p2: f64,
    c_r: f64,
    c_s: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<(usize, usize)> {
    TruncatedBinomial { d1, p1, d2, p2, c_r, c_s, gamma }.sample(rng)
}
