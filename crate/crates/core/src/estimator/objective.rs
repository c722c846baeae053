//! The least-squares objective L_D(U, G, V) = Σ_t ‖Y_t − X_t∘(UGVᵀ)‖²_F,
//! its gradient in M, and the closed-form core regression.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure_arg, Error, Result};
use crate::samplers::Observation;

/// u_iᵀ G v_j for every revealed pair, via the rows of UG.
fn predictor<'a>(u: &DMatrix<f64>, g: &DMatrix<f64>, v: &'a DMatrix<f64>) -> impl Fn(usize, usize) -> f64 + 'a {
    let ug = u * g;
    move |i, j| ug.row(i).dot(&v.row(j))
}

/// L_D at the factored point (U, G, V).
pub fn loss(u: &DMatrix<f64>, g: &DMatrix<f64>, v: &DMatrix<f64>, obs: &[Observation]) -> f64 {
    let pred = predictor(u, g, v);
    obs.iter()
        .flat_map(|rec| rec.entries())
        .map(|(i, j, y)| (pred(i, j) - y).powi(2))
        .sum()
}

/// L_D at a dense matrix M.
pub fn loss_at(m: &DMatrix<f64>, obs: &[Observation]) -> f64 {
    obs.iter()
        .flat_map(|rec| rec.entries())
        .map(|(i, j, y)| (m[(i, j)] - y).powi(2))
        .sum()
}

/// ∂L/∂M = 2 Σ_t (X_t∘(UGVᵀ) − Y_t).
pub fn loss_gradient(u: &DMatrix<f64>, g: &DMatrix<f64>, v: &DMatrix<f64>, obs: &[Observation]) -> DMatrix<f64> {
    let pred = predictor(u, g, v);
    let mut grad = DMatrix::zeros(u.nrows(), v.nrows());
    for (i, j, y) in obs.iter().flat_map(|rec| rec.entries()) {
        grad[(i, j)] += 2.0 * (pred(i, j) - y);
    }
    grad
}

/// ∂L/∂M = 2 Σ_t (X_t∘M − Y_t) at a dense M.
pub fn loss_gradient_at(m: &DMatrix<f64>, obs: &[Observation]) -> DMatrix<f64> {
    let mut grad = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, y) in obs.iter().flat_map(|rec| rec.entries()) {
        grad[(i, j)] += 2.0 * (m[(i, j)] - y);
    }
    grad
}

/// argmin_G L_D(U, G, V) from the r²×r² normal equations in vec(G), with
/// G[a, b] at index a·r + b.
///
/// Errors with [`Error::RankDeficientDesign`] when the smallest eigenvalue
/// of the normal matrix is below `min_rel` times the largest.
pub fn solve_g(u: &DMatrix<f64>, v: &DMatrix<f64>, obs: &[Observation], min_rel: f64) -> Result<DMatrix<f64>> {
    let r = u.ncols();
    ensure_arg!(v.ncols() == r, "factor ranks differ");
    let n = r * r;
    let mut normal = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut feat = vec![0.0; n];
    for (i, j, y) in obs.iter().flat_map(|rec| rec.entries()) {
        for a in 0..r {
            for b in 0..r {
                feat[a * r + b] = u[(i, a)] * v[(j, b)];
            }
        }
        for p in 0..n {
            rhs[p] += y * feat[p];
            for q in p..n {
                normal[(p, q)] += feat[p] * feat[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            normal[(p, q)] = normal[(q, p)];
        }
    }

    let eig = SymmetricEigen::new(normal.clone());
    let hi = eig.eigenvalues.max();
    let lo = eig.eigenvalues.min();
    if !(hi > 0.0) || lo < min_rel * hi {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(Error::RankDeficientDesign { condition });
    }
    let sol = normal
        .cholesky()
        .ok_or(Error::RankDeficientDesign { condition: hi / lo })?
        .solve(&rhs);
    Ok(DMatrix::from_row_slice(r, r, sol.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matmodel::generate_low_rank;
    use crate::samplers::{observe, MatchingScheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn realizable_regression_recovers_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = generate_low_rank(8, 12, 2, 4.0, &mut rng).unwrap();
        let b = observe(&m, &MatchingScheme::OneToOne, 30, 0.0, &mut rng).unwrap();
        let g = solve_g(m.left(), m.right(), &b.records, 1e-10).unwrap();
        let want = DMatrix::from_diagonal(m.singular_values());
        assert!((g - want).amax() < 1e-8);
    }

    #[test]
    fn rank_one_is_scalar_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = generate_low_rank(4, 7, 1, 4.0, &mut rng).unwrap();
        let b = observe(&m, &MatchingScheme::OneToOne, 10, 1.0, &mut rng).unwrap();
        let (u, v) = (m.left(), m.right());
        let (mut num, mut den) = (0.0, 0.0);
        for (i, j, y) in b.records.iter().flat_map(|r| r.entries()) {
            let x = u[(i, 0)] * v[(j, 0)];
            num += y * x;
            den += x * x;
        }
        let g = solve_g(u, v, &b.records, 1e-10).unwrap();
        assert!((g[(0, 0)] - num / den).abs() < 1e-10 * (num / den).abs());
    }

    #[test]
    fn first_order_condition_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = generate_low_rank(6, 9, 2, 4.0, &mut rng).unwrap();
        let b = observe(&m, &MatchingScheme::OneToOne, 20, 1.0, &mut rng).unwrap();
        let g = solve_g(m.left(), m.right(), &b.records, 1e-10).unwrap();
        // ∂L/∂G = Uᵀ (∂L/∂M) V
        let dg = m.left().transpose() * loss_gradient(m.left(), &g, m.right(), &b.records) * m.right();
        let scale = loss(m.left(), &g, m.right(), &b.records).max(1.0);
        assert!(dg.amax() <= 1e-8 * scale);
    }

    #[test]
    fn empty_design_is_rank_deficient() {
        let u = DMatrix::identity(3, 1);
        let v = DMatrix::identity(4, 1);
        let obs = vec![Observation { pairs: vec![(2, 3)], y: vec![1.0] }];
        assert!(matches!(solve_g(&u, &v, &obs, 1e-10), Err(Error::RankDeficientDesign { .. })));
    }
}
