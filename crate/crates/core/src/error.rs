//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions of related inputs disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A column has no observed values at all.
    #[error("column {col} has no observed values")]
    EmptyColumn { col: usize },

    /// A column is constant (or has fewer than two observed values), so it
    /// cannot be standardized.
    #[error("column {col} is constant or has fewer than two observed values")]
    ConstantOrEmptyColumn { col: usize },

    /// A categorical cell holds a value outside its declared levels.
    #[error("row {row}, column {col}: invalid categorical value {value} (levels 0..{levels})")]
    InvalidCategory {
        row: usize,
        col: usize,
        value: f64,
        levels: usize,
    },

    /// All weights are zero (or the weighted point set is empty).
    #[error("degenerate weights: total weight is zero for column {col}")]
    DegenerateWeights { col: usize },

    /// An option or configuration value is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Every start of the fit collapsed; diagnostics name the failure modes.
    #[error("fit failed: all {starts} starts degenerate ({diagnostics})")]
    FitFailed { starts: usize, diagnostics: String },

    /// A requested generator setting has no tabulated parameters.
    #[error("no tabulated parameters for {0}")]
    NotTabulated(String),

    /// A cell could not be parsed; position is 1-based like the file.
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },

    /// Model file carries a schema newer than this build understands.
    #[error("unsupported model schema version {found} (supported: {supported})")]
    SchemaVersion { found: u32, supported: u32 },

    /// Model file failed structural validation on load.
    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
