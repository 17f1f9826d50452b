use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BreakError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("innovation covariance is not positive semi-definite: {0}")]
    InvalidCovariance(String),

    #[error("design matrix is rank deficient: column {column} is (numerically) a combination of the preceding columns")]
    Singular { column: usize },

    #[error("break index k = {k} outside admissible range [{min}, {max}]")]
    BreakIndex { k: usize, min: usize, max: usize },

    #[error("degenerate sample: residual variance is zero")]
    DegenerateVariance,

    #[error(
        "sample too short: T = {t} leaves no candidate break points (k range [{k_min}, {k_max}])"
    )]
    EmptyScan {
        t: usize,
        k_min: usize,
        k_max: usize,
    },

    #[error("no critical value for {what}")]
    MissingCriticalValue { what: String },

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl BreakError {
    pub(crate) fn spec(field: &'static str, reason: impl Into<String>) -> Self {
        BreakError::InvalidSpec {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery (singular designs,
    /// zero variance) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            BreakError::Singular { .. } | BreakError::DegenerateVariance
        )
    }
}

pub type Result<T> = std::result::Result<T, BreakError>;
