use thiserror::Error;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tolerance:e}: estimate {estimate}, error {error:e}")]
    Quadrature {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("renewal table too short: need index {needed}, table holds {available}")]
    TableTooShort { needed: usize, available: usize },

    #[error("unknown branch id {0}")]
    UnknownBranch(usize),

    #[error("matrix not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("time {t} outside simulated horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("tree is not discretized to a {levels}-level grid")]
    NotDiscretized { levels: usize },

    #[error("hypergeometric series: {0}")]
    Hypergeometric(String),

    #[error("insufficient replicas: need at least {needed}, got {got}")]
    InsufficientReplicas { needed: usize, got: usize },

    #[error("budget exceeded: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
