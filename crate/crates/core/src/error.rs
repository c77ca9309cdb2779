use thiserror::Error;

/// Errors raised by the identification library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state norm {norm:e} exceeded divergence cutoff at t = {t}")]
    Divergence { t: usize, norm: f64 },

    #[error("weighted Gram matrix is rank deficient for row {row}")]
    RankDeficient { row: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
