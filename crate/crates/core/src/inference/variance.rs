use nalgebra::DMatrix;

use crate::error::{ensure_arg, Error, Result};
use crate::samplers::Observation;

/// σ̂² and how many empty matchings were left out of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma_sq: f64,
    pub skipped: usize,
}

/// σ̂² = (T − skipped)⁻¹ [Σ_{t∈D̃₂} ‖Y_t − X_t∘M̂₁‖²_F / sum(X_t)
///                      + Σ_{t∈D̃₁} ‖Y_t − X_t∘M̂₂‖²_F / sum(X_t)],
/// where M̂₁ was fitted on D̃₁ (`half1`) and M̂₂ on D̃₂ (`half2`). Empty
/// matchings have no per-entry residual and are skipped.
pub fn estimate_sigma(
    init1: &DMatrix<f64>,
    init2: &DMatrix<f64>,
    half1: &[Observation],
    half2: &[Observation],
    t: usize,
) -> Result<SigmaEstimate> {
    ensure_arg!(t >= 1, "T must be positive");
    let mut total = 0.0;
    let mut skipped = 0usize;
    for (init, held_out) in [(init1, half2), (init2, half1)] {
        for rec in held_out {
            if rec.revealed() == 0 {
                skipped += 1;
                continue;
            }
            let ss: f64 = rec.entries().map(|(i, j, y)| (y - init[(i, j)]).powi(2)).sum();
            total += ss / rec.revealed() as f64;
        }
    }
    let used = half1.len() + half2.len() - skipped;
    if used == 0 {
        return Err(Error::UndefinedVariance);
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} empty matchings in the noise-variance estimate");
    }
    ensure_arg!(t > skipped, "T={t} does not exceed the {skipped} skipped matchings");
    Ok(SigmaEstimate { sigma_sq: total / (t - skipped) as f64, skipped })
}

/// se = σ̂ · ‖P_M̂(Q)‖_F · √(1/(Tν)).
pub fn standard_error(sigma_hat_sq: f64, proj_mag_hat: f64, t: usize, nu: f64) -> f64 {
    sigma_hat_sq.sqrt() * proj_mag_hat * (1.0 / (t as f64 * nu)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inits_give_zero() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let h1 = vec![Observation { pairs: vec![(0, 1)], y: vec![2.0] }];
        let h2 = vec![Observation { pairs: vec![(0, 0)], y: vec![1.0] }];
        assert_eq!(estimate_sigma(&m, &m, &h1, &h2, 2).unwrap().sigma_sq, 0.0);
    }

    #[test]
    fn single_entry_unit_case() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let h2 = vec![Observation { pairs: vec![(0, 0)], y: vec![1.0 + 0.3] }];
        let got = estimate_sigma(&m, &m, &[], &h2, 4).unwrap().sigma_sq;
        assert!((got - 0.09 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn all_empty_is_undefined() {
        let m = DMatrix::zeros(1, 2);
        let e = vec![Observation { pairs: vec![], y: vec![] }];
        assert!(matches!(estimate_sigma(&m, &m, &e, &e, 2), Err(Error::UndefinedVariance)));
    }

    #[test]
    fn empty_matchings_are_skipped() {
        let m = DMatrix::zeros(1, 2);
        let h1 = vec![Observation { pairs: vec![], y: vec![] }];
        let h2 = vec![Observation { pairs: vec![(0, 0), (0, 1)], y: vec![1.0, 3.0] }];
        let s = estimate_sigma(&m, &m, &h1, &h2, 2).unwrap();
        assert_eq!(s.skipped, 1);
        assert_eq!(s.sigma_sq, 5.0);
    }

    #[test]
    fn standard_error_forms() {
        assert!((standard_error(1.0, 1.0, 100, 0.01) - 1.0).abs() < 1e-15);
        let se = standard_error(1.0, 2.0, 1000, 1.0 / 750.0);
        assert!((se - 1.7320508075688772).abs() < 1e-12);
    }
}
