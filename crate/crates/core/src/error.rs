use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("CSV has no header row")]
    MissingHeader,

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("row {row}, column `{column}`: non-numeric value `{value}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: missing value")]
    MissingCell { row: usize, column: String },

    #[error("dataset has no data rows")]
    EmptyData,

    #[error("invalid probability `{name}` = {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("input contains a single label class")]
    SingleClass,

    #[error("order is not a permutation of 0..{0}")]
    InvalidPermutation(usize),

    #[error("forced outcome recorded for a strategy that never forces")]
    ForcedOutcomeWithoutForcing,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}
