use thiserror::Error;

/// Error taxonomy for the whole pipeline. A biometric reject is never an
/// error: `authenticate` returns `AuthDecision { accepted: false }` for
/// rejects and reserves `Error` for dimension, integrity and policy faults.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank deficiency: column {column} has residual norm below 1e-12")]
    RankDeficient { column: usize },

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("policy error: {0}")]
    Policy(String),

    #[error("user {user} not found (revoked: {revoked})")]
    NotFound { user: String, revoked: bool },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("capacity exhausted: {0}")]
    Capacity(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
