use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpamError>;

#[derive(Debug, Error)]
pub enum SpamError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid rank spec: {0}")]
    InvalidRankSpec(String),

    #[error("dense expansion needs {cells} cells, above the oracle cap of {cap}")]
    OracleCap { cells: u128, cap: u128 },

    #[error(
        "exact term decomposition is only defined up to order 2 (model has order {0}); \
         higher orders mix three or more features per term"
    )]
    UnsupportedOrder(usize),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("no spectrum: model has order {0}, singular values only exist for orders >= 2")]
    NoSpectrum(usize),

    #[error("unknown feature-net architecture `{0}` (expected `deep` or `wide`)")]
    UnknownArch(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("unknown category `{value}` in column `{column}` at row {row}")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error("dataset too small: {0}")]
    TooSmall(String),

    #[error("config: {0}")]
    Config(String),

    #[error("search: {0}")]
    Search(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl SpamError {
    /// Short machine-readable category, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            SpamError::Shape(_) => "shape",
            SpamError::InvalidRankSpec(_) => "rank_spec",
            SpamError::OracleCap { .. } => "oracle_cap",
            SpamError::UnsupportedOrder(_) => "unsupported_order",
            SpamError::DegenerateSpectrum(_) => "degenerate_spectrum",
            SpamError::NoSpectrum(_) => "no_spectrum",
            SpamError::UnknownArch(_) => "unknown_arch",
            SpamError::LabelOutOfRange { .. } => "label",
            SpamError::UndefinedMetric(_) => "metric",
            SpamError::NonFinite(_) => "non_finite",
            SpamError::Io { .. } => "io",
            SpamError::Parse { .. } => "parse",
            SpamError::MissingValue { .. } => "missing_value",
            SpamError::UnknownCategory { .. } => "unknown_category",
            SpamError::Schema(_) => "schema",
            SpamError::Search(_) => "search",
            SpamError::TooSmall(_) => "too_small",
            SpamError::Config(_) => "config",
            SpamError::Json(_) => "json",
            SpamError::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SpamError::Io {
            path: path.into(),
            source,
        }
    }
}
