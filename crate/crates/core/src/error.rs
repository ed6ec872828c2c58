use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("target value `{value}` on row {row} is not numeric")]
    NonNumericTarget { row: usize, value: String },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("empty split `{0}`")]
    EmptySplit(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("logistic regression needs both classes in the labels")]
    SingleClass,
    #[error("operation requires a {expected} model, got {found}")]
    WrongModelKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("insufficient OOB residuals: {0} rows with out-of-bag coverage")]
    InsufficientOob(usize),
    #[error("empty calibration set")]
    EmptyCalibration,
    #[error("labels required to score with the goldcase oracle")]
    LabelsRequired,
    #[error("training set of {n} rows too small for CV+ at level {level}")]
    TooFewForConformal { n: usize, level: f64 },
    #[error("degenerate perfect predictor: full-coverage MSE is zero")]
    DegeneratePredictor,
    #[error("selection degenerate on validation split")]
    DegenerateSelection,
    #[error("missing value in {0}")]
    MissingCell(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
