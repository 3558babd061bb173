use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed structure: {0}")]
    Structure(String),

    #[error("solver did not converge after {iterations} iterations (instance {digest})")]
    Solver { iterations: usize, digest: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
