use thiserror::Error;

/// Errors produced anywhere in the derivation or solve pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fractional order {0} outside admissible domain {1}")]
    OrderDomain(String, &'static str),
    #[error("fractional operator applied to expression with nonzero constant term: {0}")]
    NonzeroConstant(String),
    #[error("expression degree would exceed 2: {0}")]
    UnsupportedDegree(String),
    #[error("problem spec error: {0}")]
    Spec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("derivation error: {0}")]
    Derivation(String),
    #[error("inert variable {0} has no evolution equation")]
    InertVariable(String),
    #[error("discrete system is not well posed: {0}")]
    WellPosed(String),
    #[error("numerically singular system at row {row} ({origin})")]
    Singular { row: usize, origin: String },
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
