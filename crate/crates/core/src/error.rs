use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("insufficient truncation: need degree {needed}, symbol known down to {cutoff}")]
    Truncation { needed: i64, cutoff: i64 },
    #[error("not elliptic: {0}")]
    NotElliptic(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
