#![allow(dead_code)]

use matchlearn::matmodel::{orthonormal_basis, TruncatedSvd};
use matchlearn::samplers::TruncatedBinomial;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(d1: usize, d2: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(d1, d2, |_, _| rng.random_range(-scale..scale))
}

pub fn random_orthonormal(d: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    orthonormal_basis(&uniform_matrix(d, r, 1.0, rng)).unwrap()
}

/// Rank-r reconstruction from an independent symmetric eigensolve of AᵀA.
pub fn eigen_rank_r(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let eig = (a.transpose() * a).symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let v = DMatrix::from_fn(a.ncols(), r, |i, k| eig.eigenvectors[(i, idx[k])]);
    a * &v * v.transpose()
}

pub fn reconstruct(t: &TruncatedSvd) -> DMatrix<f64> {
    t.reconstruct()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

pub fn binomial_pmf(n: usize, p: f64, k: usize) -> f64 {
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Exact pmf of the truncated pair on its full support grid.
pub fn truncated_pmf(tb: &TruncatedBinomial) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; tb.d2 + 1]; tb.d1 + 1];
    let mut total = 0.0;
    for (k1, row) in w.iter_mut().enumerate() {
        for (k2, cell) in row.iter_mut().enumerate() {
            if tb.contains(k1, k2) {
                *cell = binomial_pmf(tb.d1, tb.p1, k1) * binomial_pmf(tb.d2, tb.p2, k2);
                total += *cell;
            }
        }
    }
    for row in &mut w {
        for cell in row.iter_mut() {
            *cell /= total;
        }
    }
    w
}

/// E[min(B_r, B_s)]/(d₁d₂) by enumeration.
pub fn exact_two_sided_nu(tb: &TruncatedBinomial) -> f64 {
    let pmf = truncated_pmf(tb);
    let mut e = 0.0;
    for (k1, row) in pmf.iter().enumerate() {
        for (k2, p) in row.iter().enumerate() {
            e += k1.min(k2) as f64 * p;
        }
    }
    e / (tb.d1 * tb.d2) as f64
}

pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(x: &mut [f64]) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}
