use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("knowledge base has no concepts")]
    EmptyKb,
    #[error("concept `{concept}`: invalid cutoffs: {reason}")]
    InvalidCutoffs { concept: String, reason: String },
    #[error("concept `{concept}`: {param} must be > 0 (got {value})")]
    NonPositiveParam {
        concept: String,
        param: &'static str,
        value: f64,
    },
    #[error("duplicate concept id `{0}`")]
    DuplicateConcept(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("malformed knowledge base document: {0}")]
    KbFormat(String),

    #[error("{file}: missing required column `{column}`")]
    Schema { file: String, column: String },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error("degenerate interpolation span: t_prev == t_next == {0}")]
    DegenerateSpan(i64),
    #[error("query time {t_query} outside open span ({t_prev}, {t_next})")]
    OutOfSpan { t_prev: i64, t_next: i64, t_query: i64 },

    #[error("age {0} is below the adult threshold of 18")]
    AgeBelowAdult(u32),
    #[error("encoding variant `{0}` is not supported here")]
    UnsupportedVariant(String),

    #[error("cannot split {patients} patients into {k} folds")]
    TooFewPatients { patients: usize, k: usize },
    #[error("invalid fold count {0}; need k >= 2")]
    InvalidFoldCount(usize),

    #[error("scored set is empty")]
    EmptyScoredSet,
    #[error("score {0} is not a finite value in [0, 1]")]
    InvalidScore(f64),
    #[error("metric requires both positive and negative labels")]
    SingleClass,
    #[error("metric requires at least one positive label")]
    NoPositives,
    #[error("chunk probability list is empty")]
    EmptyChunks,
    #[error("chunk probability {0} is not in [0, 1]")]
    InvalidProbability(f64),
    #[error("no fold reports to aggregate")]
    NoReports,

    #[error("validation set must contain both classes")]
    SingleClassValidation,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
