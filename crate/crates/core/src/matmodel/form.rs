//! Sparse linear forms ⟨M, Q⟩ over a d₁×d₂ matrix.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};

/// One weighted entry of a linear form, in its on-disk shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// A weight matrix Q stored as sorted, key-unique triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    d1: usize,
    d2: usize,
    entries: Vec<Triplet>,
}

impl LinearForm {
    /// Builds a form from triplets. Keys must be unique and in range.
    pub fn new(d1: usize, d2: usize, triplets: impl IntoIterator<Item = Triplet>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for t in triplets {
            ensure_arg!(t.i < d1 && t.j < d2, "entry ({}, {}) outside {d1}x{d2}", t.i, t.j);
            ensure_arg!(t.w.is_finite(), "non-finite weight at ({}, {})", t.i, t.j);
            if map.insert((t.i, t.j), t.w).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate entry ({}, {})", t.i, t.j)));
            }
        }
        Ok(Self::from_map(d1, d2, map))
    }

    fn from_map(d1: usize, d2: usize, map: BTreeMap<(usize, usize), f64>) -> Self {
        let entries = map.into_iter().map(|((i, j), w)| Triplet { i, j, w }).collect();
        LinearForm { d1, d2, entries }
    }

    /// e_i e_jᵀ.
    pub fn entry(d1: usize, d2: usize, i: usize, j: usize) -> Result<Self> {
        Self::new(d1, d2, [Triplet { i, j, w: 1.0 }])
    }

    /// Unit weight on every listed pair.
    pub fn indicator(d1: usize, d2: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(d1, d2, pairs.iter().map(|&(i, j)| Triplet { i, j, w: 1.0 }))
    }

    /// Keeps every nonzero entry of a dense matrix.
    pub fn from_dense(q: &DMatrix<f64>) -> Result<Self> {
        let (d1, d2) = q.shape();
        let mut out = Vec::new();
        for i in 0..d1 {
            for j in 0..d2 {
                if q[(i, j)] != 0.0 {
                    out.push(Triplet { i, j, w: q[(i, j)] });
                }
            }
        }
        Self::new(d1, d2, out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.d1, self.d2);
        for t in &self.entries {
            q[(t.i, t.j)] = t.w;
        }
        q
    }

    /// self − other, merging shared keys and dropping exact cancellations.
    pub fn sub(&self, other: &LinearForm) -> Result<Self> {
        ensure_arg!(self.dims() == other.dims(), "linear form dims differ");
        let mut map: BTreeMap<(usize, usize), f64> =
            self.entries.iter().map(|t| ((t.i, t.j), t.w)).collect();
        for t in &other.entries {
            *map.entry((t.i, t.j)).or_insert(0.0) -= t.w;
        }
        map.retain(|_, w| *w != 0.0);
        Ok(Self::from_map(self.d1, self.d2, map))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn entries(&self) -> &[Triplet] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// True when every weight is zero.
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|t| t.w == 0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|t| t.w.abs()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|t| t.w * t.w).sum::<f64>().sqrt()
    }

    /// ⟨M, Q⟩.
    pub fn inner(&self, m: &DMatrix<f64>) -> f64 {
        debug_assert_eq!(m.shape(), self.dims());
        self.entries.iter().map(|t| t.w * m[(t.i, t.j)]).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.entries)?)
    }

    pub fn from_json(d1: usize, d2: usize, text: &str) -> Result<Self> {
        let triplets: Vec<Triplet> =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("linear form: {e}")))?;
        Self::new(d1, d2, triplets)
    }
}
