use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::scheme::MatchingScheme;
use super::truncated::TruncatedBinomial;
use crate::error::{Error, Result};

/// The nonzero support of one matching matrix X_t.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub d1: usize,
    pub d2: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs sorted by (row, column).
    pub fn sorted_pairs(&self) -> Vec<(usize, usize)> {
        let mut p = self.pairs.clone();
        p.sort_unstable();
        p
    }

    /// Checks the capacity constraints of `scheme`. For the two-sided scheme
    /// the size check against min(B_r, B_s) is the caller's job.
    pub fn check(&self, scheme: &MatchingScheme) -> Result<()> {
        let mut row_deg: HashMap<usize, usize> = HashMap::new();
        let mut col_seen = vec![false; self.d2];
        for &(i, j) in &self.pairs {
            if i >= self.d1 || j >= self.d2 {
                return Err(Error::InvalidArgument(format!("pair ({i}, {j}) outside {}x{}", self.d1, self.d2)));
            }
            if std::mem::replace(&mut col_seen[j], true) {
                return Err(Error::InvalidArgument(format!("column {j} used twice")));
            }
            *row_deg.entry(i).or_default() += 1;
        }
        let max_deg = row_deg.values().copied().max().unwrap_or(0);
        match *scheme {
            MatchingScheme::OneToOne => {
                if row_deg.len() != self.d1 || max_deg != 1 {
                    return Err(Error::InvalidArgument("one-to-one matching must cover every row exactly once".into()));
                }
            }
            MatchingScheme::OneToMany { k, .. } => {
                if max_deg > k {
                    return Err(Error::InvalidArgument(format!("row degree {max_deg} exceeds K={k}")));
                }
            }
            MatchingScheme::TwoSided { .. } => {
                if max_deg > 1 {
                    return Err(Error::InvalidArgument("two-sided matching uses a row twice".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Matching = serde_json::from_str(text).map_err(|e| Error::Format(format!("matching: {e}")))?;
        if m.pairs.iter().any(|&(i, j)| i >= m.d1 || j >= m.d2) {
            return Err(Error::Format("matching pair out of range".into()));
        }
        Ok(m)
    }
}

/// First `k` entries of a uniformly random permutation of 0..n.
fn ordered_sample<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut perm: Vec<usize> = (0..n).collect();
    for a in 0..k {
        let b = rng.random_range(a..n);
        perm.swap(a, b);
    }
    perm.truncate(k);
    perm
}

/// Draws one matching from `scheme`.
///
/// One-to-many draws every row degree first, then one uniform ordered sample
/// of Σ sᵢ distinct columns dealt out to rows in order. Two-sided draws the
/// arrival counts, the arrived row and column sets, and a uniform injection
/// of the smaller arrived side into the larger.
pub fn sample_matching<R: Rng + ?Sized>(
    scheme: &MatchingScheme,
    d1: usize,
    d2: usize,
    rng: &mut R,
) -> Result<Matching> {
    scheme.validate(d1, d2)?;
    let pairs = match *scheme {
        MatchingScheme::OneToOne => ordered_sample(d2, d1, rng).into_iter().enumerate().collect(),
        MatchingScheme::OneToMany { k, p0 } => {
            let deg = Binomial::new(k as u64, p0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let degrees: Vec<usize> = (0..d1).map(|_| deg.sample(rng) as usize).collect();
            let total: usize = degrees.iter().sum();
            let cols = ordered_sample(d2, total, rng);
            let mut pairs = Vec::with_capacity(total);
            let mut next = 0;
            for (i, &s) in degrees.iter().enumerate() {
                pairs.extend(cols[next..next + s].iter().map(|&j| (i, j)));
                next += s;
            }
            pairs
        }
        MatchingScheme::TwoSided { p1, p2, c_r, c_s, gamma } => {
            let (br, bs) = TruncatedBinomial { d1, p1, d2, p2, c_r, c_s, gamma }.sample(rng)?;
            let rows = ordered_sample(d1, br, rng);
            let cols = ordered_sample(d2, bs, rng);
            if br <= bs {
                let pick = ordered_sample(bs, br, rng);
                rows.iter().zip(pick).map(|(&i, c)| (i, cols[c])).collect()
            } else {
                let pick = ordered_sample(br, bs, rng);
                pick.into_iter().zip(cols.iter()).map(|(r, &j)| (rows[r], j)).collect()
            }
        }
    };
    Ok(Matching { d1, d2, pairs })
}
