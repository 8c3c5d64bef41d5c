use thiserror::Error;

/// Errors raised by the pure numeric and routing operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pairing sampler exhausted its retry budget for n={n}, k={k}")]
    SamplingFailed { n: usize, k: usize },

    #[error("generation assembly failed: {0}")]
    Assembly(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
