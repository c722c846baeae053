//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary. The exit status is nonzero on any FAIL only when
//! `MATCHLEARN_ACCEPTANCE_STRICT=1`; otherwise the report is informational.

mod common;

use std::time::Instant;

use common::*;
use matchlearn::estimator::{fit, loss_at, loss_gradient_at, solve_g, EstimatorConfig, DEFAULT_MIN_G_SINGULAR};
use matchlearn::harness::{run_simulation, RunConfig};
use matchlearn::inference::{debias, debias_ipw, project_rank_r};
use matchlearn::matmodel::{generate_low_rank, projection_magnitude, LinearForm};
use matchlearn::policy::optimal_one_to_one;
use matchlearn::samplers::{
    entrywise_probability, observe, sample_matching, MatchingScheme, TruncatedBinomial,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const SEED: u64 = 20240;

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn line(&mut self, id: &'static str, ok: bool, detail: String) {
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id);
        }
    }
}

fn schemes() -> [(&'static str, MatchingScheme); 3] {
    [
        ("one_to_one", MatchingScheme::OneToOne),
        ("one_to_many", MatchingScheme::OneToMany { k: 3, p0: 0.8 }),
        ("two_sided", MatchingScheme::TwoSided { p1: 0.8, p2: 0.8, c_r: 0.3, c_s: 0.3, gamma: 0.2 }),
    ]
}

fn study(scheme: &MatchingScheme, extra: serde_json::Value) -> RunConfig {
    let mut v = serde_json::json!({
        "d1": 50, "d2": 150, "r": 2, "scheme": scheme, "T": 600, "m": 10,
        "sigma": 1.0, "scale": 20.0, "seed": SEED,
    });
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    RunConfig::from_json(&v.to_string()).unwrap()
}

fn criterion_1(rep: &mut Report) {
    let start = Instant::now();
    let m = generate_low_rank(20, 40, 2, 20.0, &mut rng(SEED)).unwrap();
    let b = observe(&m, &MatchingScheme::OneToOne, 4000, 0.0, &mut rng(SEED + 1)).unwrap();
    let cfg = EstimatorConfig::new(2, 5, 1.0 / 40.0).with_eta(0.75);
    let f = fit(&b.records, (20, 40), &cfg, None).unwrap();
    let err = (&f.m_init - m.values()).amax() / m.lambda_min();
    let secs = start.elapsed().as_secs_f64();
    rep.line("C1 noiseless exactness", err <= 1e-6 && secs <= 30.0, format!("max-norm error / lambda_min = {err:.3e} (<= 1e-6), {secs:.2}s (<= 30s)"));
}

fn criterion_2_and_8(rep: &mut Report) -> f64 {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_orth: f64 = 0.0;
    let mut details = Vec::new();
    for (name, scheme) in schemes() {
        let mut traces = Vec::new();
        for eta in [0.5, 0.7] {
            let cfg = study(&scheme, serde_json::json!({"mode": "estimation", "eta": eta, "replications": 100}));
            let s = run_simulation(&cfg).unwrap();
            worst_orth = worst_orth.max(s.max_orthonormality_error.unwrap_or(f64::INFINITY));
            traces.push((eta, s.median_trace));
        }
        let ref_final = *traces[1].1.last().unwrap();
        for (eta, e) in &traces {
            let last = *e.last().unwrap();
            let excess = (e[4] - last) / (e[0] - last);
            let plateau = excess <= 0.05;
            let final_ok = last <= 2.0 * ref_final;
            ok &= plateau && final_ok;
            details.push(format!(
                "  {name} eta={eta}: batch1 {:.3e}, batch5 {:.3e}, batch10 {last:.3e}; residual drop at batch 5 {:.1}% (<= 5%), batch5/final {:.2}; final / eta=0.7 final {:.2} (<= 2)",
                e[0],
                e[4],
                100.0 * excess,
                e[4] / last,
                last / ref_final
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line("C2 convergence shape", ok, format!("median traces over 100 replications, {secs:.1}s (<= 600s)"));
    for d in details {
        println!("{d}");
    }
    worst_orth
}

fn criteria_3_and_4(rep: &mut Report) {
    let start = Instant::now();
    let (mut normal_ok, mut cover_ok) = (true, true);
    let mut details = Vec::new();
    for (name, scheme) in schemes() {
        let cfg = study(
            &scheme,
            serde_json::json!({
                "eta": 0.7, "replications": 300,
                "q_spec": [{"entry": [0, 0]}, "random_oto", "oto_difference", {"random_otm": {"k": 3, "p0": 0.8}}],
            }),
        );
        let s = run_simulation(&cfg).unwrap();
        for q in &s.per_q {
            let (mean, sd, ks, cov) = (q.mean.unwrap(), q.sd.unwrap(), q.ks_distance.unwrap(), q.coverage.unwrap());
            let n_ok = mean.abs() <= 0.15 && (sd - 1.0).abs() <= 0.15 && ks <= 0.08;
            let c_ok = (0.91..=0.985).contains(&cov);
            normal_ok &= n_ok;
            cover_ok &= c_ok;
            details.push(format!(
                "  {name} {}: n={} mean {mean:+.3} sd {sd:.3} ks {ks:.3} coverage {cov:.3}{}{}",
                q.label,
                q.n,
                if n_ok { "" } else { " [normality out of band]" },
                if c_ok { "" } else { " [coverage out of band]" }
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line("C3 normality", normal_ok, format!("|mean| <= 0.15, |sd-1| <= 0.15, KS <= 0.08 for 4 forms x 3 schemes, {secs:.1}s"));
    rep.line("C4 coverage", cover_ok, "95% interval coverage in [0.91, 0.985] for the same runs".into());
    for d in details {
        println!("{d}");
    }
}

fn criterion_5(rep: &mut Report) {
    let v = serde_json::json!({
        "d1": 20, "d2": 60, "r": 3, "scheme": {"type": "one_to_one"}, "T": 2000,
        "sigma": 0.5, "scale": 20.0, "seed": SEED, "replications": 100, "mode": "policy",
    });
    let s = run_simulation(&RunConfig::from_json(&v.to_string()).unwrap()).unwrap();
    let recovery = s.recovery.as_ref().unwrap().rate;
    let cov = s.per_q[0].coverage.unwrap();
    rep.line(
        "C5 optimal matching",
        recovery >= 0.95 && (0.88..=0.99).contains(&cov),
        format!("recovery {recovery:.2} (>= 0.95), coverage of optimal reward {cov:.2} in [0.88, 0.99]"),
    );
}

fn brute_force_value(m: &DMatrix<f64>) -> f64 {
    fn go(m: &DMatrix<f64>, i: usize, used: &mut [bool]) -> f64 {
        if i == m.nrows() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for j in 0..m.ncols() {
            if !used[j] {
                used[j] = true;
                best = best.max(m[(i, j)] + go(m, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(m, 0, &mut vec![false; m.ncols()])
}

fn criterion_6(rep: &mut Report) {
    let start = Instant::now();
    let mut r = rng(SEED + 6);
    let mut failures = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d1 = r.random_range(1..=6);
        let d2 = r.random_range(d1..=7);
        let m = uniform_matrix(d1, d2, 10.0, &mut r);
        let mt = optimal_one_to_one(&m).unwrap();
        let got: f64 = mt.pairs.iter().map(|&(i, j)| m[(i, j)]).sum();
        worst = worst.max((got - brute_force_value(&m)).abs());
    }
    if worst > 1e-9 {
        failures.push(format!("assignment gap {worst:.2e}"));
    }

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (d1, d2, k) = (r.random_range(3..15), r.random_range(15..30), r.random_range(1..4));
        let u = random_orthonormal(d1, k, &mut r);
        let v = random_orthonormal(d2, k, &mut r);
        let q = uniform_matrix(d1, d2, 1.0, &mut r);
        let pu = DMatrix::<f64>::identity(d1, d1) - &u * u.transpose();
        let pv = DMatrix::<f64>::identity(d2, d2) - &v * v.transpose();
        let oracle = (&q - &pu * &q * &pv).norm();
        let got = projection_magnitude(&u, &v, &LinearForm::from_dense(&q).unwrap()).unwrap();
        worst = worst.max((got - oracle).abs());
    }
    if worst > 1e-10 {
        failures.push(format!("projection magnitude gap {worst:.2e}"));
    }

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = 2;
        let truth = generate_low_rank(4, 6, k, 3.0, &mut r).unwrap();
        let obs = observe(&truth, &MatchingScheme::OneToOne, 12, 1.0, &mut r).unwrap().records;
        let u = random_orthonormal(4, k, &mut r);
        let v = random_orthonormal(6, k, &mut r);
        let mut normal = DMatrix::<f64>::zeros(k * k, k * k);
        let mut rhs = DVector::<f64>::zeros(k * k);
        for o in &obs {
            for (i, j, y) in o.entries() {
                let x = DVector::from_fn(k * k, |c, _| u[(i, c / k)] * v[(j, c % k)]);
                normal += &x * x.transpose();
                rhs += &x * y;
            }
        }
        let oracle = normal.lu().solve(&rhs).unwrap();
        let got = solve_g(&u, &v, &obs, DEFAULT_MIN_G_SINGULAR).unwrap();
        let gap = (0..k * k).map(|c| (got[(c / k, c % k)] - oracle[c]).abs()).fold(0.0, f64::max);
        worst = worst.max(gap / oracle.amax().max(1.0));
    }
    if worst > 1e-9 {
        failures.push(format!("core solve gap {worst:.2e}"));
    }

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = uniform_matrix(6, 9, 3.0, &mut r);
        worst = worst.max((project_rank_r(&a, 2).unwrap().m - eigen_rank_r(&a, 2)).amax());
    }
    if worst > 1e-10 {
        failures.push(format!("rank projection gap {worst:.2e}"));
    }

    let truth = generate_low_rank(8, 16, 1, 3.0, &mut r).unwrap();
    let obs = observe(&truth, &MatchingScheme::OneToOne, 50, 1.0, &mut r).unwrap().records;
    let init = uniform_matrix(8, 16, 1.0, &mut r);
    let nu = 1.0 / 16.0;
    let plain = debias(&init, &obs, nu).unwrap().m_unbs;
    let ipw = debias_ipw(&init, &obs, &DMatrix::from_element(8, 16, 1.0 / nu)).unwrap().m_unbs;
    if plain != ipw {
        failures.push("uniform propensity debiasing differs".into());
    }

    let tb = TruncatedBinomial { d1: 10, p1: 0.6, d2: 14, p2: 0.5, c_r: 0.3, c_s: 0.3, gamma: 0.2 };
    let exact = truncated_pmf(&tb);
    let n = 50_000;
    let mut counts = vec![vec![0usize; tb.d2 + 1]; tb.d1 + 1];
    for _ in 0..n {
        let (a, b) = tb.sample(&mut r).unwrap();
        counts[a][b] += 1;
    }
    let mut tv = 0.0;
    for a in 0..=tb.d1 {
        for b in 0..=tb.d2 {
            tv += (counts[a][b] as f64 / n as f64 - exact[a][b]).abs();
        }
    }
    tv *= 0.5;
    if tv > 0.02 {
        failures.push(format!("truncated binomial TV {tv:.4}"));
    }

    let mut worst_z = 0.0f64;
    for (d1, d2) in [(10, 20), (50, 150)] {
        let scheme = MatchingScheme::TwoSided { p1: 0.8, p2: 0.8, c_r: 0.3, c_s: 0.3, gamma: 0.2 };
        let exact = exact_two_sided_nu(&TruncatedBinomial { d1, p1: 0.8, d2, p2: 0.8, c_r: 0.3, c_s: 0.3, gamma: 0.2 });
        let est = entrywise_probability(&scheme, d1, d2, 100_000, &mut rng(1)).unwrap();
        worst_z = worst_z.max((est.nu - exact).abs() / est.mc_se.unwrap());
    }
    if worst_z > 3.0 {
        failures.push(format!("two-sided nu off by {worst_z:.2} standard errors"));
    }

    let secs = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs < 10.0;
    let detail = if failures.is_empty() {
        format!("assignment, projection, core solve, rank projection, uniform IPW, truncated pmf (TV {tv:.4}), two-sided nu ({worst_z:.2} se); {secs:.2}s")
    } else {
        format!("{}; {secs:.2}s", failures.join(", "))
    };
    rep.line("C6 oracle equivalences", ok, detail);
}

fn criterion_7(rep: &mut Report) {
    let mut r = rng(SEED + 7);
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let (d1, d2) = (r.random_range(2..6), r.random_range(6..10));
        let truth = generate_low_rank(d1, d2, 1, 3.0, &mut rng(SEED + 100 + inst)).unwrap();
        let obs = observe(&truth, &MatchingScheme::OneToOne, 12, 1.0, &mut r).unwrap().records;
        let m = uniform_matrix(d1, d2, 2.0, &mut r);
        let grad = loss_gradient_at(&m, &obs);
        let h = 1e-6;
        for i in 0..d1 {
            for j in 0..d2 {
                let mut e = DMatrix::zeros(d1, d2);
                e[(i, j)] = h;
                let fd = (loss_at(&(&m + &e), &obs) - loss_at(&(&m - &e), &obs)) / (2.0 * h);
                worst = worst.max((fd - grad[(i, j)]).abs() / grad[(i, j)].abs().max(1.0));
            }
        }
    }
    rep.line("C7 gradient", worst <= 1e-4, format!("worst relative gap to central differences {worst:.2e} over 20 instances (<= 1e-4)"));
}

fn criterion_8(rep: &mut Report, worst_orth: f64) {
    let mut violations = 0;
    for (s, (_, scheme)) in schemes().iter().enumerate() {
        let mut r = rng(SEED + 80 + s as u64);
        for _ in 0..10_000 {
            let m = sample_matching(scheme, 50, 150, &mut r).unwrap();
            violations += usize::from(m.check(scheme).is_err());
        }
    }
    rep.line(
        "C8 invariants",
        violations == 0 && worst_orth <= 1e-10,
        format!("{violations} capacity violations in 3 x 10^4 matchings; max factor orthonormality error {worst_orth:.2e} across convergence runs"),
    );
}

fn main() {
    let mut rep = Report { failed: Vec::new() };
    criterion_1(&mut rep);
    let worst_orth = criterion_2_and_8(&mut rep);
    criteria_3_and_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_7(&mut rep);
    criterion_8(&mut rep, worst_orth);
    println!("acceptance: {} of 8 criteria failed {:?}", rep.failed.len(), rep.failed);
    if std::env::var("MATCHLEARN_ACCEPTANCE_STRICT").as_deref() == Ok("1") && !rep.failed.is_empty() {
        std::process::exit(1);
    }
}
