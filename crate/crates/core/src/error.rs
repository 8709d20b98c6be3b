use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("incomplete matrix: {0}")]
    IncompleteMatrix(String),
    #[error("duplicate model name `{0}`")]
    DuplicateModel(String),
    #[error("duplicate task name `{0}`")]
    DuplicateTask(String),
    #[error("non-numeric cell at row {row}, column {column}: `{value}`")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("leaderboard too small: {0}")]
    TooSmall(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("zero usable records")]
    NoRecords,
    #[error("task `{0}` has a degenerate score range (all scores identical)")]
    DegenerateTask(String),
    #[error("leaderboard must be normalized first")]
    NotNormalized,
    #[error("need >= 2 models, got {0}")]
    TooFewModels(usize),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("single-class labels")]
    SingleClass,
    #[error("not enough training rows: need {need}, got {got}")]
    NotEnoughRows { need: usize, got: usize },
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel matrix is not positive definite after jitter escalation")]
    NotPositiveDefinite,
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("no valid split: {0}")]
    NoValidSplit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
