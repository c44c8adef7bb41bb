use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("formula is singular at lambda = 0; use the dedicated limit")]
    SingularAtZero,
    #[error("snapshot line {line}: {msg}")]
    Snapshot { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
