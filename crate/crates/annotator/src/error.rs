use thiserror::Error;

pub type Result<T, E = AnnotatorError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AnnotatorError {
    #[error("authentication rejected by {endpoint} (HTTP {status})")]
    Auth { endpoint: String, status: u16 },

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("invalid job: {0}")]
    InvalidJob(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
