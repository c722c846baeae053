use std::fmt::Write;

use serde::Serialize;

use super::FactorState;
use crate::matmodel::RewardMatrix;

/// Per-batch diagnostics of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    /// 1-based batch index p of the iterate M̂^(p).
    pub batch: usize,
    /// ‖M̂^(p) − M‖²_max / λ²_min, when the truth is known.
    pub rel_max_err_sq: Option<f64>,
    pub g_sigma_min: f64,
    pub g_sigma_max: f64,
    /// ‖∂L/∂M‖_F on the step batch; absent for the initial iterate.
    pub grad_norm: Option<f64>,
    pub orth_err: f64,
}

impl TraceRow {
    pub(super) fn new(batch: usize, st: &FactorState, grad_norm: Option<f64>, truth: Option<&RewardMatrix>) -> Self {
        let rel_max_err_sq = truth.map(|m| {
            let err = (st.estimate() - m.values()).amax();
            (err / m.lambda_min()).powi(2)
        });
        let s = &st.g_svd.sigma;
        TraceRow {
            batch,
            rel_max_err_sq,
            g_sigma_min: s[s.len() - 1],
            g_sigma_max: s[0],
            grad_norm,
            orth_err: st.orthonormality_error(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitTrace {
    pub rows: Vec<TraceRow>,
}

impl FitTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The relative-error column; `None` if any row lacks it.
    pub fn rel_errors(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.rel_max_err_sq).collect()
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        self.rows.iter().map(|r| r.orth_err).fold(0.0, f64::max)
    }

    /// CSV with columns batch, rel_max_err_sq, g_sigma_min, g_sigma_max,
    /// grad_norm. Missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let mut out = String::from("batch,rel_max_err_sq,g_sigma_min,g_sigma_max,grad_norm\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.batch,
                opt(r.rel_max_err_sq),
                r.g_sigma_min,
                r.g_sigma_max,
                opt(r.grad_norm)
            );
        }
        out
    }
}
