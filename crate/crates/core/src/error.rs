use thiserror::Error;

/// Errors raised by instance construction, the solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("could not bracket the constraint multiplier below {0:e}")]
    BracketFailure(f64),

    #[error("enumeration guard exceeded: {what} = {value} > {limit}")]
    EnumerationGuard {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("feasible set is empty")]
    Infeasible,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("non-finite cost encountered")]
    NonFiniteCost,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
