use thiserror::Error;

/// Errors produced across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sensor index {index} out of range 1..={p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("range error: {0}")]
    Range(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("Riccati iteration failed to converge after {iterations} iterations (last change {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("wrong filter mode: {0}")]
    Mode(String),

    #[error("malformed formula: {0}")]
    Formula(String),

    #[error("decode failure: {0}")]
    Decode(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
