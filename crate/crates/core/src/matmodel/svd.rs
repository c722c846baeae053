//! Truncated SVD with a deterministic sign convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_arg, Error, Result};

/// Relative gap below which the r-th and (r+1)-th singular values are
/// treated as tied.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Top-r singular triplets of a dense matrix.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Set when the spectrum is tied (or zero) at the rank cut, so the
    /// returned subspace is not uniquely determined.
    pub degenerate: bool,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// U·diag(Λ)·Vᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (k, s) in self.sigma.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Top-r SVD of `a`.
///
/// Singular values come back nonincreasing. For each k the entry of the k-th
/// left singular vector with the largest magnitude (first one on ties) is made
/// positive, flipping the matching right vector, so the output is a pure
/// function of the input.
pub fn svd_r(a: &DMatrix<f64>, r: usize) -> Result<TruncatedSvd> {
    let (d1, d2) = a.shape();
    let full = d1.min(d2);
    ensure_arg!(r >= 1 && r <= full, "rank {r} outside 1..={full}");
    ensure_arg!(a.iter().all(|x| x.is_finite()), "matrix has non-finite entries");

    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Internal("SVD failed to converge".into()))?;
    let u_all = svd.u.expect("left vectors requested");
    let vt_all = svd.v_t.expect("right vectors requested");
    let s_all = svd.singular_values;

    let mut order: Vec<usize> = (0..s_all.len()).collect();
    order.sort_by(|&x, &y| s_all[y].total_cmp(&s_all[x]).then(x.cmp(&y)));

    let mut u = DMatrix::zeros(d1, r);
    let mut v = DMatrix::zeros(d2, r);
    let mut sigma = DVector::zeros(r);
    for (k, &src) in order.iter().take(r).enumerate() {
        sigma[k] = s_all[src].max(0.0);
        let mut ucol = u_all.column(src).into_owned();
        let mut vcol = vt_all.row(src).transpose();
        let lead = ucol
            .iter()
            .enumerate()
            .fold((0usize, -1.0f64), |best, (i, x)| {
                if x.abs() > best.1 {
                    (i, x.abs())
                } else {
                    best
                }
            })
            .0;
        if ucol[lead] < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        u.set_column(k, &ucol);
        v.set_column(k, &vcol);
    }

    let top = sigma[0];
    let cut = sigma[r - 1];
    let next = order.get(r).map(|&i| s_all[i]);
    let tied = next.is_some_and(|n| (cut - n).abs() <= DEGENERATE_GAP * top);
    let degenerate = tied || cut <= DEGENERATE_GAP * top || top == 0.0;
    if degenerate {
        log::warn!("degenerate spectrum at rank cut r={r}: sigma_r={cut:e}, sigma_r+1={next:?}");
    }

    Ok(TruncatedSvd { u, sigma, v, degenerate })
}

/// Left singular vectors of a tall matrix: an orthonormal basis for its
/// column span, aligned with the sign convention of [`svd_r`].
pub fn orthonormal_basis(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(svd_r(a, a.ncols())?.u)
}

/// max |AᵀA − I|.
pub fn orthonormality_error(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Spectral-norm distance between the projectors onto span(a) and span(b).
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = a * a.transpose() - b * b.transpose();
    diff.singular_values().max()
}
