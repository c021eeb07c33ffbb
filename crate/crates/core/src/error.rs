use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernel matrix is ill-conditioned: Cholesky failed with jitter up to {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("insufficient data: need at least {needed} values, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("neighbor graph is disconnected ({components} components); increase k")]
    Disconnected { components: usize },

    #[error("embedding failed: {0}")]
    EmbeddingFailure(String),

    #[error("query point {index} was not part of the joint embedding")]
    UnseenPoint { index: usize },

    #[error("data integrity error at {timestamp}: {reason}")]
    DataIntegrity { timestamp: String, reason: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
