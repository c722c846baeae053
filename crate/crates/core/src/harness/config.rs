use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{theory_batch_count, EstimatorConfig, DEFAULT_ETA};
use crate::matmodel::LinearForm;
use crate::samplers::{sample_matching, Matching, MatchingScheme};

/// Target linear form for a replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSpec {
    /// e_i e_jᵀ.
    Entry(usize, usize),
    /// Indicator of a uniformly drawn one-to-one matching.
    RandomOto,
    /// Difference of two independently drawn one-to-one matchings.
    OtoDifference,
    /// Indicator of a drawn one-to-many matching.
    RandomOtm { k: usize, p0: f64 },
    /// A matching (`{"d1","d2","pairs"}`) or triplet list (`[{"i","j","w"}]`).
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpecList {
    One(QSpec),
    Many(Vec<QSpec>),
}

impl QSpecList {
    pub fn specs(&self) -> Vec<QSpec> {
        match self {
            QSpecList::One(q) => vec![q.clone()],
            QSpecList::Many(v) => v.clone(),
        }
    }
}

const MAX_EMPTY_REDRAWS: usize = 1000;

impl QSpec {
    /// Parses the command-line shorthand `entry:i,j`, `random_oto`,
    /// `oto_difference`, `random_otm:K,p0`; anything else is a file path.
    pub fn parse_cli(text: &str) -> Result<QSpec> {
        let bad = |what: &str| Error::Config(format!("cannot parse Q spec `{text}`: {what}"));
        if let Some(rest) = text.strip_prefix("entry:") {
            let (i, j) = rest.split_once(',').ok_or_else(|| bad("expected entry:i,j"))?;
            let i = i.trim().parse().map_err(|_| bad("row index"))?;
            let j = j.trim().parse().map_err(|_| bad("column index"))?;
            return Ok(QSpec::Entry(i, j));
        }
        if let Some(rest) = text.strip_prefix("random_otm:") {
            let (k, p0) = rest.split_once(',').ok_or_else(|| bad("expected random_otm:K,p0"))?;
            let k = k.trim().parse().map_err(|_| bad("K"))?;
            let p0 = p0.trim().parse().map_err(|_| bad("p0"))?;
            return Ok(QSpec::RandomOtm { k, p0 });
        }
        Ok(match text {
            "random_oto" => QSpec::RandomOto,
            "oto_difference" => QSpec::OtoDifference,
            path => QSpec::File(PathBuf::from(path)),
        })
    }

    pub fn label(&self) -> String {
        match self {
            QSpec::Entry(i, j) => format!("entry({i},{j})"),
            QSpec::RandomOto => "random_oto".into(),
            QSpec::OtoDifference => "oto_difference".into(),
            QSpec::RandomOtm { k, p0 } => format!("random_otm({k},{p0})"),
            QSpec::File(p) => format!("file({})", p.display()),
        }
    }

    /// Problems with this spec for a d₁×d₂ market; file contents are not read.
    pub fn problems(&self, d1: usize, d2: usize) -> Vec<String> {
        match *self {
            QSpec::Entry(i, j) if i >= d1 || j >= d2 => {
                vec![format!("q_spec entry({i},{j}) is outside {d1}x{d2}")]
            }
            QSpec::RandomOto if d1 > d2 => vec!["q_spec random_oto needs d1 <= d2".into()],
            QSpec::OtoDifference if d1 > d2 => vec!["q_spec oto_difference needs d1 <= d2".into()],
            QSpec::RandomOtm { k, p0 } => match (MatchingScheme::OneToMany { k, p0 }).validate(d1, d2) {
                Ok(()) => vec![],
                Err(e) => vec![format!("q_spec random_otm: {e}")],
            },
            _ => vec![],
        }
    }

    /// Materializes the form; random specs draw from `rng`.
    pub fn resolve<R: Rng + ?Sized>(&self, d1: usize, d2: usize, rng: &mut R) -> Result<LinearForm> {
        let draw = |scheme: &MatchingScheme, rng: &mut R| -> Result<LinearForm> {
            for _ in 0..MAX_EMPTY_REDRAWS {
                let mt = sample_matching(scheme, d1, d2, rng)?;
                if !mt.is_empty() {
                    return LinearForm::indicator(d1, d2, &mt.pairs);
                }
            }
            Err(Error::Config(format!("{} kept drawing empty matchings", scheme.label())))
        };
        match self {
            QSpec::Entry(i, j) => LinearForm::entry(d1, d2, *i, *j),
            QSpec::RandomOto => draw(&MatchingScheme::OneToOne, rng),
            QSpec::OtoDifference => {
                let a = draw(&MatchingScheme::OneToOne, rng)?;
                let b = draw(&MatchingScheme::OneToOne, rng)?;
                a.sub(&b)
            }
            QSpec::RandomOtm { k, p0 } => draw(&MatchingScheme::OneToMany { k: *k, p0: *p0 }, rng),
            QSpec::File(path) => read_form(path, d1, d2),
        }
    }
}

/// Reads a linear form from a matching file or a triplet list.
pub fn read_form(path: &Path, d1: usize, d2: usize) -> Result<LinearForm> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read Q file {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let mt = Matching::from_json(&text)?;
        if (mt.d1, mt.d2) != (d1, d2) {
            return Err(Error::Format(format!(
                "matching in {} is {}x{}, expected {d1}x{d2}",
                path.display(),
                mt.d1,
                mt.d2
            )));
        }
        LinearForm::indicator(d1, d2, &mt.pairs).map_err(|e| Error::Format(e.to_string()))
    } else {
        LinearForm::from_json(d1, d2, &text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Fit on the full batch and record convergence traces.
    Estimation,
    /// Full debiased pipeline on every configured Q.
    #[default]
    Inference,
    /// Optimal one-to-one matching recovery and evaluation.
    Policy,
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_scale() -> f64 {
    20.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_replications() -> usize {
    300
}
fn default_q() -> QSpecList {
    QSpecList::One(QSpec::Entry(0, 0))
}
fn default_mc() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}

/// Replication study settings, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    pub scheme: MatchingScheme,
    #[serde(rename = "T", alias = "t")]
    pub t: usize,
    /// Batch pairs per fit; ⌈ln d₂⌉ when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub sigma: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_q")]
    pub q_spec: QSpecList,
    #[serde(default)]
    pub mode: Mode,
    /// Draw a fresh M in every replication instead of once per run.
    #[serde(default)]
    pub regenerate_m: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_true")]
    pub write_traces: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
}

impl RunConfig {
    /// Parses and validates; every violated precondition is listed in one
    /// error.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn batch_pairs(&self) -> usize {
        self.m.unwrap_or_else(|| theory_batch_count(self.d2))
    }

    /// Estimator settings with ν filled in by the caller.
    pub fn estimator(&self, nu: f64) -> EstimatorConfig {
        EstimatorConfig::new(self.r, self.batch_pairs(), nu).with_eta(self.eta)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let (d1, d2) = (self.d1, self.d2);
        if d1 == 0 || d2 == 0 {
            p.push(format!("dimensions must be positive, got {d1}x{d2}"));
        }
        if d1 > d2 {
            p.push(format!("d1 <= d2 required, got {d1}x{d2}"));
        }
        if self.r == 0 || self.r > d1.min(d2) {
            p.push(format!("r must lie in 1..={}, got {}", d1.min(d2), self.r));
        }
        if d1 >= 1 && d2 >= 1 {
            if let Err(e) = self.scheme.validate(d1, d2) {
                p.push(format!("scheme: {e}"));
            }
        }
        let m = self.batch_pairs();
        if m == 0 {
            p.push("m must be positive".into());
        }
        let per_fit = match self.mode {
            Mode::Estimation => self.t,
            _ => self.t / 2,
        };
        if per_fit < 2 * m {
            p.push(format!("T={} leaves {per_fit} matchings per fit, fewer than 2m={}", self.t, 2 * m));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            p.push(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            p.push(format!("sigma must be finite and nonnegative, got {}", self.sigma));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            p.push(format!("scale must be positive, got {}", self.scale));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            p.push(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.mc_samples == 0 {
            p.push("mc_samples must be positive".into());
        }
        if self.workers == Some(0) {
            p.push("workers must be positive".into());
        }
        let specs = self.q_spec.specs();
        if specs.is_empty() && self.mode == Mode::Inference {
            p.push("q_spec list is empty".into());
        }
        for q in &specs {
            p.extend(q.problems(d1, d2));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }
}
