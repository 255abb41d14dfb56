use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("unknown escalation series `{series}` referenced by `{item}`")]
    UnknownSeries { item: String, series: String },

    #[error("unknown sensor setup `{0}` (expected one of C, R, T, L, CR, TR, CL, TL, CRL, TRL)")]
    UnknownSetup(String),

    #[error("unknown city `{name}` (known cities: {known})")]
    UnknownCity { name: String, known: String },

    #[error("catalog has no `{0}` item")]
    MissingCategory(&'static str),

    #[error("month {month} outside 0..={max}")]
    MonthOutOfRange { month: i64, max: i64 },

    #[error("series `{series}` has a gap after {after}")]
    MonthGap { series: String, after: String },

    #[error("series do not share a common month range: {0}")]
    MismatchedRange(String),

    #[error("zero variance: correlation undefined")]
    ZeroVariance,

    #[error("covariance not positive definite after regularization up to {0:e}")]
    Cholesky(f64),

    #[error("matrix `{0}` is not reciprocal")]
    NonReciprocal(String),

    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("matrix `{label}` is inconsistent (CI = {ci:.4} >= {limit})")]
    Inconsistent { label: String, ci: f64, limit: f64 },

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("iteration {iteration}: {message}")]
    Simulation { iteration: usize, message: String },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures reading or writing files, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
