//! Magnitude of the tangent-space projection P_M(Q) = Q − U⊥U⊥ᵀ Q V⊥V⊥ᵀ.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::form::LinearForm;
use crate::error::{ensure_arg, Error, Result};

/// Radicands below this are rounding noise and are clamped to zero.
const NEGATIVE_SLACK: f64 = 1e-12;

/// ‖P_M(Q)‖_F computed as √(‖UᵀQ‖² + ‖QV‖² − ‖UᵀQV‖²) without forming
/// anything dense in d₁ or d₂.
pub fn projection_magnitude(u: &DMatrix<f64>, v: &DMatrix<f64>, q: &LinearForm) -> Result<f64> {
    let r = u.ncols();
    let (d1, d2) = q.dims();
    ensure_arg!(v.ncols() == r, "factor ranks differ: {} vs {}", r, v.ncols());
    ensure_arg!(
        u.nrows() == d1 && v.nrows() == d2,
        "form is {d1}x{d2} but factors are {}x{} and {}x{}",
        u.nrows(),
        r,
        v.nrows(),
        r
    );

    // column j of UᵀQ, row i of QV
    let mut utq: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut qv: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut utqv = vec![0.0; r * r];
    for t in q.entries() {
        let col = utq.entry(t.j).or_insert_with(|| vec![0.0; r]);
        let row = qv.entry(t.i).or_insert_with(|| vec![0.0; r]);
        for a in 0..r {
            col[a] += t.w * u[(t.i, a)];
            row[a] += t.w * v[(t.j, a)];
            for b in 0..r {
                utqv[a * r + b] += t.w * u[(t.i, a)] * v[(t.j, b)];
            }
        }
    }
    let sq = |m: &BTreeMap<usize, Vec<f64>>| -> f64 { m.values().flatten().map(|x| x * x).sum() };
    let radicand = sq(&utq) + sq(&qv) - utqv.iter().map(|x| x * x).sum::<f64>();

    let scale = q.frobenius_norm().powi(2).max(1.0);
    if radicand < -NEGATIVE_SLACK * scale {
        return Err(Error::Internal(format!(
            "negative projection radicand {radicand:e}; factors are not orthonormal"
        )));
    }
    Ok(radicand.max(0.0).sqrt())
}
