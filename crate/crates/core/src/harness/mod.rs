//! Replication studies, report files and the command-line front end.
//!
//! A study fixes M (unless `regenerate_m`), draws the target forms once, and
//! then runs independent replications that differ only in the sampled
//! matchings and noise. Random streams: M uses stream 0 of `seed`, each
//! replication stream 1 of `seed ^ rep`, Q draws stream 2, the two-sided ν
//! estimate stream 3.

mod cli;
mod config;
mod simulate;

pub use crate::stats::ks_statistic;
pub use cli::cli_main;
pub use config::{read_form, Mode, QSpec, QSpecList, RunConfig};
pub use simulate::{
    coverage_rate, run_simulation, worker_count, write_outputs, QRow, QSummary, Recovery, ReplicationFailure,
    ReplicationSummary, HISTOGRAM_BINS, HISTOGRAM_RANGE, MAX_FAILURE_RATE, WORKERS_ENV,
};
