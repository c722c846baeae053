//! Learning and inference for low-rank reward matrices observed through
//! capacity-constrained matchings.
//!
//! The pipeline is: draw matchings ([`samplers`]), fit a low-rank estimate by
//! rotation-calibrated gradient descent with sample splitting
//! ([`estimator`]), debias and project it to get linear-form estimates with
//! standard errors ([`inference`]), and search or evaluate one-to-one
//! assignment policies ([`policy`]). [`harness`] drives replication studies.

pub mod error;
pub mod harness;
pub mod estimator;
pub mod inference;
pub mod matmodel;
pub mod policy;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};
