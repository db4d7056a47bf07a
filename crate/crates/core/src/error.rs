use thiserror::Error;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite field samples at {count} quadrature node(s), first at {first:?}")]
    NonFiniteSamples { count: usize, first: Vec<f64> },

    #[error("non-finite state at step {step} of {n} (t = {t})")]
    NonFiniteState { step: usize, n: usize, t: f64 },

    #[error("path {path_index} failed at level n = {level}: {source}")]
    PathFailed {
        master_seed: u64,
        path_index: u64,
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("midpoint bisection did not converge on [{s}, {t}]")]
    NoConvergence { s: f64, t: f64 },

    #[error("LPS condition violated: d/p + 2/q = {value} (must be < 1)")]
    LpsViolated { value: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("instability detected at time index {step}: growth factor {factor:.3e}; refine the time grid")]
    Instability { step: usize, factor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
