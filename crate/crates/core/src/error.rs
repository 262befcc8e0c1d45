use std::path::PathBuf;

use crate::state::ValidityReport;

/// Errors produced by the solver, diagnostics and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is not mean-free (zero mode {zero_mode:e}, tolerance {tolerance:e})")]
    NotMeanFree { zero_mode: f64, tolerance: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("small-perturbation regime violated: min(1 + a) = {min_one_plus_a} < 1/2")]
    OutsideSmallRegime { min_one_plus_a: f64 },

    #[error("state rejected: {0}")]
    InvalidState(ValidityReport),

    #[error("validity gate tripped at t = {t}; last valid time {last_valid_t}: {report}")]
    ValidityGate {
        t: f64,
        last_valid_t: f64,
        report: ValidityReport,
    },

    #[error("decay fit rejected: {0}")]
    Fit(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error comes from reading or validating a configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidConfig(_) | Error::InvalidParameter(_) | Error::InvalidGrid(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
