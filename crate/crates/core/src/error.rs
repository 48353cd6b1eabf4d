use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("dataset has no usable rows")]
    EmptyDataset,

    #[error("parse error at record {record}, column `{column}`: cannot read {value:?}")]
    Parse {
        record: usize,
        column: String,
        value: String,
    },

    #[error("invalid fold count k={k} for n={n} rows")]
    InvalidFold { k: usize, n: usize },

    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("shape mismatch: expected {expected} features, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step {step}: {source}")]
    Step {
        /// 1-based position of the failing step in the pipeline.
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("every individual in the population was disqualified: {0}")]
    AllDisqualified(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
