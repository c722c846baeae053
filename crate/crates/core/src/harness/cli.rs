use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::config::{QSpec, RunConfig};
use super::simulate::{run_simulation, stream, write_outputs, STREAM_MATRIX, STREAM_NU, STREAM_Q, STREAM_REPLICATION};
use crate::error::{Error, Result};
use crate::estimator::{fit, theory_batch_count, EstimatorConfig, DEFAULT_ETA};
use crate::inference::{combine_and_estimate, Direction, InferenceArtifacts};
use crate::matmodel::{generate_low_rank, matrix_to_csv};
use crate::policy::{evaluate_policy, optimal_one_to_one};
use crate::samplers::{entrywise_probability, observe, MatchingScheme, ObservationBatch};

#[derive(Parser, Debug)]
#[command(name = "matchlearn", version, about = "Low-rank reward learning and inference from matching data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a replication study.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a true matrix and one observation batch for a study config.
    Generate {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit the low-rank estimate; writes m_init.csv and trace.csv.
    Estimate {
        batch: PathBuf,
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Confidence interval and test for one linear form.
    Infer {
        batch: PathBuf,
        config: PathBuf,
        /// entry:i,j | random_oto | oto_difference | random_otm:K,p0 | file
        #[arg(long)]
        q: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        v0: f64,
        #[arg(long, value_enum, default_value_t = Side::TwoSided)]
        direction: Side,
    },
    /// Optimal one-to-one matching of the estimate and its evaluation.
    Policy {
        batch: PathBuf,
        config: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Entrywise sampling probability of a scheme.
    Nu {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        c_r: f64,
        #[arg(long, default_value_t = 0.0)]
        c_s: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    Oto,
    Otm,
    Tside,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Side {
    Greater,
    Less,
    TwoSided,
}

impl From<Side> for Direction {
    fn from(s: Side) -> Self {
        match s {
            Side::Greater => Direction::Greater,
            Side::Less => Direction::Less,
            Side::TwoSided => Direction::TwoSided,
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_mc() -> usize {
    100_000
}

/// Fit settings read from a config file; other keys are ignored so a study
/// config can be reused.
#[derive(Debug, Clone, Deserialize)]
struct FitSettings {
    r: usize,
    #[serde(default)]
    m: Option<usize>,
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_mc")]
    mc_samples: usize,
}

impl FitSettings {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    fn estimator(&self, batch: &ObservationBatch) -> Result<(EstimatorConfig, Option<f64>)> {
        let (d1, d2) = batch.dims();
        let nu = entrywise_probability(&batch.scheme, d1, d2, self.mc_samples, &mut stream(self.seed, STREAM_NU))
            .map_err(|e| Error::Config(e.to_string()))?;
        let cfg = EstimatorConfig::new(self.r, self.m.unwrap_or_else(|| theory_batch_count(d2)), nu.nu).with_eta(self.eta);
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.r > d1.min(d2) {
            return Err(Error::Config(format!("r={} exceeds min(d1, d2)={}", self.r, d1.min(d2))));
        }
        Ok((cfg, nu.mc_se))
    }
}

fn read_batch(path: &Path) -> Result<ObservationBatch> {
    let f = File::open(path).map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))?;
    ObservationBatch::read_jsonl(BufReader::new(f))
}

fn pipeline(batch_path: &Path, config: &Path) -> Result<(ObservationBatch, FitSettings, InferenceArtifacts)> {
    let batch = read_batch(batch_path)?;
    let settings = FitSettings::load(config)?;
    let (est, mc_se) = settings.estimator(&batch)?;
    let mut art = combine_and_estimate(&batch, &est)?;
    if let Some(p) = art.provenance.as_mut() {
        p.nu_mc_se = mc_se;
    }
    Ok((batch, settings, art))
}

#[derive(Serialize)]
struct NuOutput {
    nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_se: Option<f64>,
}

#[derive(Serialize)]
struct EstimateOutput {
    m_init: PathBuf,
    trace: PathBuf,
    dropped: usize,
}

fn scheme_from_args(
    scheme: SchemeArg,
    k: Option<usize>,
    p0: Option<f64>,
    p1: Option<f64>,
    p2: Option<f64>,
    c_r: f64,
    c_s: f64,
    gamma: f64,
) -> Result<MatchingScheme> {
    let need = |x: Option<f64>, name: &str| x.ok_or_else(|| Error::Config(format!("--{name} is required")));
    Ok(match scheme {
        SchemeArg::Oto => MatchingScheme::OneToOne,
        SchemeArg::Otm => MatchingScheme::OneToMany {
            k: k.ok_or_else(|| Error::Config("--k is required".into()))?,
            p0: need(p0, "p0")?,
        },
        SchemeArg::Tside => MatchingScheme::TwoSided { p1: need(p1, "p1")?, p2: need(p2, "p2")?, c_r, c_s, gamma },
    })
}

fn execute(cmd: Command) -> Result<String> {
    match cmd {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let summary = run_simulation(&cfg)?;
            let dir = out.or_else(|| cfg.outputs.clone()).unwrap_or_else(|| PathBuf::from("."));
            write_outputs(&cfg, &summary, &dir)?;
            Ok(serde_json::json!({
                "out": dir,
                "completed": summary.completed,
                "failed": summary.failures.len(),
            })
            .to_string())
        }
        Command::Generate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let m = generate_low_rank(cfg.d1, cfg.d2, cfg.r, cfg.scale, &mut stream(cfg.seed, STREAM_MATRIX))?;
            let mut batch = observe(&m, &cfg.scheme, cfg.t, cfg.sigma, &mut stream(cfg.seed, STREAM_REPLICATION))?;
            batch.seed = Some(cfg.seed);
            std::fs::create_dir_all(&out)?;
            m.write(&out.join("m.csv"), &out.join("m.json"))?;
            batch.write_jsonl(File::create(out.join("batch.jsonl"))?)?;
            Ok(serde_json::json!({ "matrix": out.join("m.csv"), "batch": out.join("batch.jsonl") }).to_string())
        }
        Command::Estimate { batch, config, out } => {
            let batch = read_batch(&batch)?;
            let settings = FitSettings::load(&config)?;
            let (mut est, _) = settings.estimator(&batch)?;
            est.record_trace = true;
            let f = fit(&batch.records, batch.dims(), &est, None)?;
            std::fs::create_dir_all(&out)?;
            let (m_path, t_path) = (out.join("m_init.csv"), out.join("trace.csv"));
            std::fs::write(&m_path, matrix_to_csv(&f.m_init))?;
            std::fs::write(&t_path, f.trace.unwrap_or_default().to_csv())?;
            Ok(serde_json::to_string(&EstimateOutput { m_init: m_path, trace: t_path, dropped: f.dropped })?)
        }
        Command::Infer { batch, config, q, alpha, v0, direction } => {
            let (b, settings, art) = pipeline(&batch, &config)?;
            let (d1, d2) = b.dims();
            let spec = QSpec::parse_cli(&q)?;
            if let Some(p) = spec.problems(d1, d2).first() {
                return Err(Error::Config(p.clone()));
            }
            let form = spec.resolve(d1, d2, &mut stream(settings.seed, STREAM_Q))?;
            let res = art.infer_against(&form, alpha.unwrap_or(settings.alpha), v0, direction.into())?;
            Ok(serde_json::to_string(&res)?)
        }
        Command::Policy { batch, config, alpha } => {
            let (_, settings, art) = pipeline(&batch, &config)?;
            let matching = optimal_one_to_one(&art.m_hat)?;
            let eval = evaluate_policy(&art, &matching, alpha.unwrap_or(settings.alpha))?;
            Ok(serde_json::to_string(&eval)?)
        }
        Command::Nu { scheme, d1, d2, k, p0, p1, p2, c_r, c_s, gamma, mc_samples, seed } => {
            let scheme = scheme_from_args(scheme, k, p0, p1, p2, c_r, c_s, gamma)?;
            scheme.validate(d1, d2).map_err(|e| Error::Config(e.to_string()))?;
            let nu = entrywise_probability(&scheme, d1, d2, mc_samples, &mut stream(seed, STREAM_NU))?;
            Ok(serde_json::to_string(&NuOutput { nu: nu.nu, mc_se: nu.mc_se })?)
        }
    }
}

fn diagnostic(kind: &str, code: i32, message: &str) -> String {
    serde_json::json!({ "error": kind, "exit_code": code, "message": message }).to_string()
}

/// Runs the command line; returns the process exit code. Results go to
/// stdout, a one-line JSON diagnostic to stderr on failure.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                use std::io::Write;
                let _ = write!(std::io::stdout(), "{e}");
                return 0;
            }
            let msg = e.to_string();
            eprintln!("{}", diagnostic("usage", 2, msg.lines().next().unwrap_or("")));
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            use std::io::Write;
            let _ = writeln!(std::io::stdout(), "{out}");
            0
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", diagnostic(e.kind(), code, &e.to_string()));
            code
        }
    }
}
