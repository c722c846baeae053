mod common;

use common::*;
use matchlearn::inference::project_rank_r;
use matchlearn::matmodel::*;
use nalgebra::DMatrix;
use rand::Rng;

fn complement_oracle(u: &DMatrix<f64>, v: &DMatrix<f64>, q: &DMatrix<f64>) -> (f64, f64) {
    let pu = DMatrix::<f64>::identity(u.nrows(), u.nrows()) - u * u.transpose();
    let pv = DMatrix::<f64>::identity(v.nrows(), v.nrows()) - v * v.transpose();
    let perp = &pu * q * &pv;
    ((q - &perp).norm(), perp.norm())
}

fn random_form(d1: usize, d2: usize, nnz: usize, r: &mut rand_chacha::ChaCha8Rng) -> LinearForm {
    let mut dense = DMatrix::zeros(d1, d2);
    for _ in 0..nnz {
        dense[(r.random_range(0..d1), r.random_range(0..d2))] = r.random_range(-2.0..2.0);
    }
    LinearForm::from_dense(&dense).unwrap()
}

#[test]
fn projection_matches_explicit_complement() {
    let mut r = rng(1);
    for _ in 0..50 {
        let (d1, d2, rank) = (r.random_range(3..15), r.random_range(15..30), r.random_range(1..3));
        let u = random_orthonormal(d1, rank, &mut r);
        let v = random_orthonormal(d2, rank, &mut r);
        let q = random_form(d1, d2, r.random_range(1..12), &mut r);
        let (oracle, _) = complement_oracle(&u, &v, &q.to_dense());
        let got = projection_magnitude(&u, &v, &q).unwrap();
        assert!((got - oracle).abs() <= 1e-10, "{got} vs {oracle}");
    }
}

#[test]
fn projection_and_complement_split_the_norm() {
    let mut r = rng(2);
    for _ in 0..30 {
        let u = random_orthonormal(8, 2, &mut r);
        let v = random_orthonormal(20, 2, &mut r);
        let q = random_form(8, 20, 6, &mut r);
        let p = projection_magnitude(&u, &v, &q).unwrap();
        let (_, perp) = complement_oracle(&u, &v, &q.to_dense());
        let total = q.frobenius_norm();
        assert!((p * p + perp * perp - total * total).abs() <= 1e-10 * total.max(1.0).powi(2));
    }
}

#[test]
fn projection_ignores_basis_rotation() {
    let mut r = rng(3);
    for _ in 0..20 {
        let u = random_orthonormal(10, 3, &mut r);
        let v = random_orthonormal(25, 3, &mut r);
        let o1 = random_orthonormal(3, 3, &mut r);
        let o2 = random_orthonormal(3, 3, &mut r);
        let q = random_form(10, 25, 8, &mut r);
        let a = projection_magnitude(&u, &v, &q).unwrap();
        let b = projection_magnitude(&(&u * o1), &(&v * o2), &q).unwrap();
        assert!((a - b).abs() <= 1e-10);
    }
}

#[test]
fn single_entry_projection_formula() {
    let mut r = rng(4);
    let u = random_orthonormal(6, 2, &mut r);
    let v = random_orthonormal(9, 2, &mut r);
    let q = LinearForm::entry(6, 9, 2, 5).unwrap();
    let (a, b) = (u.row(2).norm_squared(), v.row(5).norm_squared());
    let expect = (a + b - a * b).sqrt();
    assert!((projection_magnitude(&u, &v, &q).unwrap() - expect).abs() <= 1e-12);
}

#[test]
fn rank_projection_matches_eigen_oracle() {
    let mut r = rng(5);
    for _ in 0..20 {
        let a = uniform_matrix(6, 9, 3.0, &mut r);
        let p = project_rank_r(&a, 2).unwrap();
        let oracle = eigen_rank_r(&a, 2);
        assert!((&p.m - &oracle).amax() <= 1e-10);
        assert!(orthonormality_error(&p.u) <= 1e-12);
    }
}

#[test]
fn rank_projection_is_idempotent_on_rank_r() {
    let mut r = rng(6);
    let m = generate_low_rank(10, 14, 3, 5.0, &mut r).unwrap();
    let p = project_rank_r(m.values(), 3).unwrap();
    assert!((&p.m - m.values()).amax() <= 1e-10);
}

#[test]
fn svd_r_is_best_rank_r() {
    let mut r = rng(7);
    let a = uniform_matrix(7, 11, 1.0, &mut r);
    let t = svd_r(&a, 3).unwrap();
    let best = (&a - t.reconstruct()).norm();
    for _ in 0..200 {
        let x = uniform_matrix(7, 3, 1.0, &mut r) * uniform_matrix(3, 11, 1.0, &mut r);
        assert!((&a - x).norm() >= best - 1e-12);
    }
}

#[test]
fn reward_matrix_files_round_trip() {
    let mut r = rng(8);
    let m = generate_low_rank(5, 9, 2, 20.0, &mut r).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (csv, side) = (dir.path().join("m.csv"), dir.path().join("m.json"));
    m.write(&csv, &side).unwrap();
    let back = RewardMatrix::read(&csv, &side).unwrap();
    assert_eq!(back.values(), m.values());
    assert_eq!(back.rank(), 2);
}

#[test]
fn malformed_matrix_csv_is_format_error() {
    let err = matrix_from_csv("1,2\n3\n").unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(matrix_from_csv("1,x\n").is_err());
}

#[test]
fn linear_form_json_round_trip() {
    let mut r = rng(9);
    let q = random_form(4, 7, 6, &mut r);
    let back = LinearForm::from_json(4, 7, &q.to_json().unwrap()).unwrap();
    assert_eq!(back, q);
    assert_eq!(LinearForm::from_dense(&q.to_dense()).unwrap(), q);
}

#[test]
fn generated_matrix_has_requested_spectrum() {
    let mut r = rng(10);
    let m = generate_low_rank(30, 60, 2, 20.0, &mut r).unwrap();
    let full = m.values().clone().svd(false, false).singular_values;
    let mut s: Vec<f64> = full.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    assert!(s[2] <= 1e-10 * s[0]);
    assert!((s[1] - m.lambda_min()).abs() <= 1e-9 * s[0]);
    let info = m.spectral_info();
    assert!(info.mu >= 1.0 && info.kappa >= 1.0);
}
