//! Reward matrices, truncated SVD, incoherence and tangent-space geometry.

mod form;
mod svd;
mod tangent;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};

pub use form::{LinearForm, Triplet};
pub use svd::{orthonormal_basis, orthonormality_error, projector_distance, svd_r, TruncatedSvd};
pub use tangent::projection_magnitude;

/// A rank-r reward matrix M = UΛVᵀ together with its factors.
#[derive(Debug, Clone)]
pub struct RewardMatrix {
    values: DMatrix<f64>,
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
}

/// Spectral summary of a reward matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralInfo {
    pub mu: f64,
    pub kappa: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub alpha_d: f64,
}

/// Shape metadata written next to the CSV values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
}

impl RewardMatrix {
    /// Truncates `values` to rank r and keeps the truncation. Requires
    /// d₂ ≥ d₁ and a strictly positive r-th singular value.
    pub fn from_values(values: &DMatrix<f64>, r: usize) -> Result<Self> {
        let (d1, d2) = values.shape();
        ensure_arg!(d2 >= d1, "expected d2 >= d1, got {d1}x{d2}");
        let t = svd_r(values, r)?;
        Self::from_factors(t.u, t.sigma, t.v)
    }

    pub fn from_factors(u: DMatrix<f64>, sigma: DVector<f64>, v: DMatrix<f64>) -> Result<Self> {
        let r = sigma.len();
        ensure_arg!(r >= 1, "rank must be positive");
        ensure_arg!(u.ncols() == r && v.ncols() == r, "factor widths differ from rank {r}");
        ensure_arg!(v.nrows() >= u.nrows(), "expected d2 >= d1");
        ensure_arg!(
            sigma.iter().all(|s| *s > 0.0) && sigma.as_slice().windows(2).all(|w| w[0] >= w[1]),
            "singular values must be positive and nonincreasing"
        );
        ensure_arg!(
            orthonormality_error(&u) <= 1e-10 && orthonormality_error(&v) <= 1e-10,
            "factors are not orthonormal"
        );
        let values = TruncatedSvd {
            u: u.clone(),
            sigma: sigma.clone(),
            v: v.clone(),
            degenerate: false,
        }
        .reconstruct();
        Ok(RewardMatrix { values, u, sigma, v })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn left(&self) -> &DMatrix<f64> {
        &self.u
    }
    pub fn right(&self) -> &DMatrix<f64> {
        &self.v
    }
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.sigma
    }
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
    pub fn dims(&self) -> (usize, usize) {
        self.values.shape()
    }
    pub fn lambda_min(&self) -> f64 {
        self.sigma[self.rank() - 1]
    }
    pub fn lambda_max(&self) -> f64 {
        self.sigma[0]
    }

    pub fn spectral_info(&self) -> SpectralInfo {
        let (d1, d2) = self.dims();
        SpectralInfo {
            mu: incoherence(&self.u, &self.v),
            kappa: self.lambda_max() / self.lambda_min(),
            lambda_min: self.lambda_min(),
            lambda_max: self.lambda_max(),
            alpha_d: d2 as f64 / d1 as f64,
        }
    }

    /// Writes `values` as row-major CSV to `csv` and {d1, d2, r} to `sidecar`.
    pub fn write(&self, csv: &Path, sidecar: &Path) -> Result<()> {
        std::fs::write(csv, matrix_to_csv(&self.values))?;
        let (d1, d2) = self.dims();
        let meta = MatrixSidecar { d1, d2, r: self.rank() };
        std::fs::write(sidecar, serde_json::to_string(&meta)?)?;
        Ok(())
    }

    /// Reads a matrix written by [`Self::write`]; the stored values are kept
    /// exactly and must be rank r up to rounding.
    pub fn read(csv: &Path, sidecar: &Path) -> Result<Self> {
        let meta: MatrixSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar)?)
            .map_err(|e| Error::Format(format!("matrix sidecar: {e}")))?;
        let values = matrix_from_csv(&std::fs::read_to_string(csv)?)?;
        if values.shape() != (meta.d1, meta.d2) {
            return Err(Error::Format(format!(
                "CSV is {}x{} but sidecar says {}x{}",
                values.nrows(),
                values.ncols(),
                meta.d1,
                meta.d2
            )));
        }
        let mut m = Self::from_values(&values, meta.r).map_err(|e| Error::Format(e.to_string()))?;
        let gap = (&m.values - &values).amax();
        if gap > 1e-8 * values.amax().max(1.0) {
            return Err(Error::Format(format!("matrix is not rank {} (residual {gap:.3e})", meta.r)));
        }
        m.values = values;
        Ok(m)
    }
}

/// Draws i.i.d. Uniform[−scale, scale] entries and truncates to rank r.
pub fn generate_low_rank<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    r: usize,
    scale: f64,
    rng: &mut R,
) -> Result<RewardMatrix> {
    ensure_arg!(1 <= r && r <= d1 && d1 <= d2, "need 1 <= r <= d1 <= d2, got r={r}, d1={d1}, d2={d2}");
    ensure_arg!(scale > 0.0 && scale.is_finite(), "scale must be positive, got {scale}");
    let raw = DMatrix::from_fn(d1, d2, |_, _| rng.random_range(-scale..=scale));
    RewardMatrix::from_values(&raw, r)
}

/// μ = max{√(d₁/r)·‖U‖₂,∞, √(d₂/r)·‖V‖₂,∞}.
pub fn incoherence(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let scaled = |f: &DMatrix<f64>| {
        let max_row = f.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
        (f.nrows() as f64 / f.ncols() as f64).sqrt() * max_row
    };
    scaled(u).max(scaled(v))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("CSV line {}: {e}", n + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!("CSV line {} has {} cells, expected {}", n + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}
