use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {required} observations for {what}, got {got}")]
    TooFewObservations {
        what: &'static str,
        required: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("design matrix is rank deficient at column {index} ({name})")]
    RankDeficient { index: usize, name: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("estimator {estimator} is incompatible with the '{row}' condition: {reason}")]
    IncompatibleCondition {
        estimator: String,
        row: &'static str,
        reason: String,
    },

    #[error("cell (condition={condition}, delta={delta}, estimator={estimator}) replicate {replicate}: {source}")]
    Cell {
        condition: String,
        delta: f64,
        estimator: String,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
