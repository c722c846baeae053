use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::estimator::{fit, FitTrace};
use crate::inference::{estimate_records, InferenceResult};
use crate::matmodel::{generate_low_rank, LinearForm, RewardMatrix};
use crate::policy::{evaluate_policy, optimal_one_to_one};
use crate::samplers::{entrywise_probability, observe, Matching};
use crate::stats::ks_statistic;

pub(crate) const STREAM_MATRIX: u64 = 0;
pub(crate) const STREAM_REPLICATION: u64 = 1;
pub(crate) const STREAM_Q: u64 = 2;
pub(crate) const STREAM_NU: u64 = 3;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "MATCHLEARN_WORKERS";
/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.10;
pub const HISTOGRAM_BINS: usize = 50;
pub const HISTOGRAM_RANGE: (f64, f64) = (-4.0, 4.0);

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One replication's result for one linear form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QRow {
    pub rep: usize,
    pub truth: f64,
    pub point: f64,
    pub se: f64,
    /// (point − truth)/se; absent when se = 0.
    pub z: Option<f64>,
    pub covered: bool,
}

impl QRow {
    fn new(rep: usize, truth: f64, res: &InferenceResult) -> Self {
        let z = (res.se > 0.0).then(|| res.standardized(truth));
        QRow { rep, truth, point: res.point, se: res.se, z, covered: res.covers(truth) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QSummary {
    pub label: String,
    /// ⟨M, Q⟩ when M is fixed across replications.
    pub truth: Option<f64>,
    pub n: usize,
    pub standardized_stats: Vec<f64>,
    pub ks_distance: Option<f64>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub coverage: Option<f64>,
    /// Standardized statistics outside the histogram range.
    pub below_range: usize,
    pub above_range: usize,
    #[serde(skip)]
    pub rows: Vec<QRow>,
}

impl QSummary {
    fn new(label: String, truth: Option<f64>, rows: Vec<QRow>) -> Result<Self> {
        let stats: Vec<f64> = rows.iter().filter_map(|r| r.z).collect();
        let n = stats.len();
        let (mean, sd) = mean_sd(&stats);
        let ks_distance = if n > 0 { Some(ks_statistic(&stats)?) } else { None };
        let coverage = (!rows.is_empty()).then(|| coverage_rate_rows(&rows));
        let (lo, hi) = HISTOGRAM_RANGE;
        Ok(QSummary {
            label,
            truth,
            n,
            below_range: stats.iter().filter(|&&z| z < lo).count(),
            above_range: stats.iter().filter(|&&z| z > hi).count(),
            standardized_stats: stats,
            ks_distance,
            mean,
            sd,
            coverage,
            rows,
        })
    }

    /// Counts of the standardized statistics in equal bins over the
    /// histogram range; the last bin is closed.
    pub fn histogram(&self) -> Vec<usize> {
        let (lo, hi) = HISTOGRAM_RANGE;
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let mut counts = vec![0; HISTOGRAM_BINS];
        for &z in &self.standardized_stats {
            if (lo..=hi).contains(&z) {
                let b = (((z - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
                counts[b] += 1;
            }
        }
        counts
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn coverage_rate_rows(rows: &[QRow]) -> f64 {
    rows.iter().filter(|r| r.covered).count() as f64 / rows.len() as f64
}

fn mean_sd(x: &[f64]) -> (Option<f64>, Option<f64>) {
    if x.is_empty() {
        return (None, None);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.len() > 1).then(|| (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub rep: usize,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    pub recovered: usize,
    pub total: usize,
    pub rate: f64,
}

/// Aggregates of a replication study, in replication order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub mode: Mode,
    pub replications: usize,
    pub completed: usize,
    pub failures: Vec<ReplicationFailure>,
    pub nu: f64,
    pub nu_mc_se: Option<f64>,
    pub per_q: Vec<QSummary>,
    /// Policy mode: how often the matching from M̂ equals the one from M.
    pub recovery: Option<Recovery>,
    /// Median of ‖M̂^(p) − M‖²_max/λ²_min over replications, per batch.
    pub median_trace: Vec<f64>,
    pub max_orthonormality_error: Option<f64>,
    #[serde(skip)]
    pub traces: Vec<(usize, FitTrace)>,
}

impl ReplicationSummary {
    /// Final-batch median relative error.
    pub fn final_median_error(&self) -> Option<f64> {
        self.median_trace.last().copied()
    }
}

/// Fraction of closed intervals containing `truth`.
pub fn coverage_rate(intervals: &[(f64, f64)], truth: f64) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::InvalidArgument("coverage of an empty interval list".into()));
    }
    let hits = intervals.iter().filter(|&&(lo, hi)| lo <= truth && truth <= hi).count();
    Ok(hits as f64 / intervals.len() as f64)
}

struct RepOutcome {
    trace: Option<FitTrace>,
    rows: Vec<QRow>,
    recovered: Option<bool>,
}

struct Setup {
    matrix: Option<RewardMatrix>,
    forms: Vec<(String, LinearForm)>,
    nu: f64,
    nu_mc_se: Option<f64>,
}

fn setup(config: &RunConfig) -> Result<Setup> {
    let (d1, d2) = (config.d1, config.d2);
    let matrix = if config.regenerate_m {
        None
    } else {
        Some(generate_low_rank(d1, d2, config.r, config.scale, &mut stream(config.seed, STREAM_MATRIX))?)
    };
    let nu = entrywise_probability(&config.scheme, d1, d2, config.mc_samples, &mut stream(config.seed, STREAM_NU))?;
    let mut q_rng = stream(config.seed, STREAM_Q);
    let forms = match config.mode {
        Mode::Inference => config
            .q_spec
            .specs()
            .iter()
            .map(|q| Ok((q.label(), q.resolve(d1, d2, &mut q_rng)?)))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    Ok(Setup { matrix, forms, nu: nu.nu, nu_mc_se: nu.mc_se })
}

fn replicate(config: &RunConfig, setup: &Setup, rep: usize) -> Result<RepOutcome> {
    let (d1, d2) = (config.d1, config.d2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ rep as u64);
    rng.set_stream(STREAM_REPLICATION);
    let fresh;
    let m = match &setup.matrix {
        Some(m) => m,
        None => {
            fresh = generate_low_rank(d1, d2, config.r, config.scale, &mut rng)?;
            &fresh
        }
    };
    let batch = observe(m, &config.scheme, config.t, config.sigma, &mut rng)?;
    let est = config.estimator(setup.nu);

    match config.mode {
        Mode::Estimation => {
            let f = fit(&batch.records, (d1, d2), &est, Some(m))?;
            Ok(RepOutcome { trace: f.trace, rows: Vec::new(), recovered: None })
        }
        Mode::Inference => {
            let art = estimate_records(&batch.records, (d1, d2), &est, Some(m))?;
            let rows = setup
                .forms
                .iter()
                .map(|(_, q)| Ok(QRow::new(rep, q.inner(m.values()), &art.infer(q, config.alpha)?)))
                .collect::<Result<_>>()?;
            Ok(RepOutcome { trace: art.fits[0].trace.clone(), rows, recovered: None })
        }
        Mode::Policy => {
            let best = optimal_one_to_one(m.values())?;
            let truth = matching_value(m, &best);
            let art = estimate_records(&batch.records, (d1, d2), &est, Some(m))?;
            let found = optimal_one_to_one(&art.m_hat)?;
            let eval = evaluate_policy(&art, &found, config.alpha)?;
            Ok(RepOutcome {
                trace: art.fits[0].trace.clone(),
                rows: vec![QRow::new(rep, truth, &eval.inference)],
                recovered: Some(found.sorted_pairs() == best.sorted_pairs()),
            })
        }
    }
}

fn matching_value(m: &RewardMatrix, mt: &Matching) -> f64 {
    mt.pairs.iter().map(|&(i, j)| m.values()[(i, j)]).sum()
}

/// Worker count: `MATCHLEARN_WORKERS`, else the config, else rayon's default.
pub fn worker_count(config: &RunConfig) -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .or(config.workers)
}

/// Runs every replication and reduces the results in replication order.
pub fn run_simulation(config: &RunConfig) -> Result<ReplicationSummary> {
    config.validate()?;
    let setup = setup(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(config) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RepOutcome>> =
        pool.install(|| (0..config.replications).into_par_iter().map(|rep| replicate(config, &setup, rep)).collect());

    let mut failures = Vec::new();
    let mut traces = Vec::new();
    let mut rows: Vec<Vec<QRow>> = vec![Vec::new(); if config.mode == Mode::Policy { 1 } else { setup.forms.len() }];
    let mut recovered = 0;
    for (rep, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(o) => {
                if let Some(t) = o.trace {
                    traces.push((rep, t));
                }
                for (k, row) in o.rows.into_iter().enumerate() {
                    rows[k].push(row);
                }
                recovered += o.recovered.unwrap_or(false) as usize;
            }
            Err(e) => {
                log::warn!("replication {rep} failed: {e}");
                failures.push(ReplicationFailure { rep, kind: e.kind().into(), message: e.to_string() });
            }
        }
    }
    let total = config.replications;
    if failures.len() as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::TooManyFailures { failed: failures.len(), total });
    }
    if !failures.is_empty() {
        log::warn!("{} of {total} replications failed", failures.len());
    }
    let completed = total - failures.len();

    let labels: Vec<(String, Option<f64>)> = match config.mode {
        Mode::Policy => {
            let truth = setup.matrix.as_ref().map(|m| optimal_one_to_one(m.values()).map(|b| matching_value(m, &b)));
            vec![("optimal_matching".into(), truth.transpose()?)]
        }
        _ => setup
            .forms
            .iter()
            .map(|(l, q)| (l.clone(), setup.matrix.as_ref().map(|m| q.inner(m.values()))))
            .collect(),
    };
    let per_q = labels
        .into_iter()
        .zip(rows)
        .map(|((label, truth), r)| QSummary::new(label, truth, r))
        .collect::<Result<_>>()?;

    Ok(ReplicationSummary {
        mode: config.mode,
        replications: total,
        completed,
        failures,
        nu: setup.nu,
        nu_mc_se: setup.nu_mc_se,
        per_q,
        recovery: (config.mode == Mode::Policy).then(|| Recovery {
            recovered,
            total: completed,
            rate: if completed > 0 { recovered as f64 / completed as f64 } else { 0.0 },
        }),
        median_trace: median_trace(&traces),
        max_orthonormality_error: traces.iter().map(|(_, t)| t.max_orthonormality_error()).reduce(f64::max),
        traces,
    })
}

fn median_trace(traces: &[(usize, FitTrace)]) -> Vec<f64> {
    let errs: Vec<Vec<f64>> = traces.iter().filter_map(|(_, t)| t.rel_errors()).collect();
    let len = errs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|k| {
            let mut col: Vec<f64> = errs.iter().map(|e| e[k]).collect();
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a RunConfig,
    summary: &'a ReplicationSummary,
}

/// Writes summary.json, standardized_stats.csv, coverage.csv,
/// histogram.csv, convergence.csv and, if enabled, trace_rep<k>.csv.
pub fn write_outputs(config: &RunConfig, summary: &ReplicationSummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&SummaryFile { config, summary })?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;

    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let mut stats = String::from("rep,q,label,truth,point,se,z,covered\n");
    let mut cov = String::from("q,label,alpha,n,coverage,ks_distance,mean,sd\n");
    let mut hist = String::from("q,label,bin_low,bin_high,count\n");
    let (lo, hi) = HISTOGRAM_RANGE;
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    for (k, q) in summary.per_q.iter().enumerate() {
        let label = csv_field(&q.label);
        for r in &q.rows {
            let _ = writeln!(stats, "{},{k},{},{},{},{},{},{}", r.rep, label, r.truth, r.point, r.se, opt(r.z), r.covered);
        }
        let _ = writeln!(
            cov,
            "{k},{},{},{},{},{},{},{}",
            label,
            config.alpha,
            q.rows.len(),
            opt(q.coverage),
            opt(q.ks_distance),
            opt(q.mean),
            opt(q.sd)
        );
        for (b, c) in q.histogram().into_iter().enumerate() {
            let _ = writeln!(hist, "{k},{},{},{},{c}", label, lo + b as f64 * width, lo + (b + 1) as f64 * width);
        }
    }
    std::fs::write(dir.join("standardized_stats.csv"), stats)?;
    std::fs::write(dir.join("coverage.csv"), cov)?;
    std::fs::write(dir.join("histogram.csv"), hist)?;

    let mut conv = String::from("batch,median_rel_max_err_sq\n");
    for (p, e) in summary.median_trace.iter().enumerate() {
        let _ = writeln!(conv, "{},{e}", p + 1);
    }
    std::fs::write(dir.join("convergence.csv"), conv)?;

    if config.write_traces {
        for (rep, t) in &summary.traces {
            std::fs::write(dir.join(format!("trace_rep{rep}.csv")), t.to_csv())?;
        }
    }
    Ok(())
}
