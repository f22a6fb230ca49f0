//! Error type shared across the crate.
//!
//! Every failure mode callers are expected to handle gets its own variant so
//! the CLI can emit a machine-readable record (`kind` + message) and tests can
//! match on the exact condition.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("response column '{column}' has no observed entries")]
    FullyMissingColumn { column: String },

    #[error("missing value in predictor column '{column}' at data row {row}; predictors must be complete")]
    MissingPredictor { row: usize, column: String },

    #[error("cannot parse cell at data row {row}, column '{column}': {detail}")]
    CsvCell {
        row: usize,
        column: String,
        detail: String,
    },

    #[error("column '{column}' not found in the input header")]
    ColumnNotFound { column: String },

    #[error("response '{column}' is fitted perfectly on its training rows (zero residual); variance-adjusted penalty weights are undefined")]
    PerfectFit { column: String },

    #[error("penalized precision problem is unbounded: {0}")]
    Unbounded(String),

    #[error("scatter matrix is rank deficient and the off-diagonal penalty is zero; the unpenalized precision estimate does not exist")]
    RankDeficientScatter,

    #[error(
        "design matrix column '{0}' has zero sum of squares; its coefficient is not estimable"
    )]
    DegenerateDesign(String),

    #[error("no train/test split satisfied per-response train coverage after {retries} attempts")]
    SplitInvariant { retries: u32 },

    #[error("EM objective increased by {increase:.3e} at iteration {iteration}; this indicates a solver bug")]
    ObjectiveIncrease { iteration: usize, increase: f64 },

    #[error("nonpositive value at data row {row}, response '{column}'; the log transform requires strictly positive observed entries")]
    NonPositive { row: usize, column: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable identifier for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NotSpd(_) => "not_spd",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidInput(_) => "invalid_input",
            Error::FullyMissingColumn { .. } => "fully_missing_column",
            Error::MissingPredictor { .. } => "missing_predictor",
            Error::CsvCell { .. } => "csv_cell",
            Error::ColumnNotFound { .. } => "column_not_found",
            Error::PerfectFit { .. } => "perfect_fit",
            Error::Unbounded(_) => "unbounded",
            Error::RankDeficientScatter => "rank_deficient_scatter",
            Error::DegenerateDesign(_) => "degenerate_design",
            Error::SplitInvariant { .. } => "split_invariant",
            Error::ObjectiveIncrease { .. } => "objective_increase",
            Error::NonPositive { .. } => "non_positive",
            Error::Io(_) => "io",
        }
    }
}
