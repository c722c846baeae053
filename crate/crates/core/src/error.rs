use thiserror::Error;

/// Errors raised by the learning, inference and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectral initialization aggregate is identically zero")]
    DegenerateInit,

    #[error("rank-deficient design for core regression (condition estimate {condition:.3e})")]
    RankDeficientDesign { condition: f64 },

    #[error("core matrix is numerically singular (relative smallest singular value {ratio:.3e})")]
    SingularCore { ratio: f64 },

    #[error("truncated binomial region is infeasible: {0}")]
    InfeasibleTruncation(String),

    #[error("noise variance undefined: every matching is empty")]
    UndefinedVariance,

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("batch {index} failed: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} replications failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("data format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Innermost error, looking through batch wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Batch { source, .. } => source.root(),
            other => other,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DegenerateInit => "degenerate_init",
            Error::RankDeficientDesign { .. } => "rank_deficient_design",
            Error::SingularCore { .. } => "singular_core",
            Error::InfeasibleTruncation(_) => "infeasible_truncation",
            Error::UndefinedVariance => "undefined_variance",
            Error::DegenerateTest(_) => "degenerate_test",
            Error::Internal(_) => "internal",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::Format(_) | Error::Json(_) => "format",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Batch { .. } => unreachable!(),
        }
    }

    /// Process exit code: 2 configuration, 3 numerical, 4 data format.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::Format(_) | Error::Json(_) | Error::Io(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn at_batch(self, index: usize) -> Error {
        Error::Batch {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! ensure_arg {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::InvalidArgument(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure_arg;
