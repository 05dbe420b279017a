use thiserror::Error;

/// Errors raised by scenario generation, problem assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("infeasible rate requirements on the {band} band: sum of minimum fractions is {total:.6} > 1")]
    InfeasibleRate { band: &'static str, total: f64 },

    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    #[error("observed demand set is empty")]
    EmptyDemand,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
