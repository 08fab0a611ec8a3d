use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto process exit codes:
/// configuration problems exit 1, numerical degeneracy exits 2, failed
/// validation checks exit 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration file, CLI argument, or API contract violation.
    #[error("config error: {0}")]
    Config(String),

    /// The coupled-dipole system could not be solved reliably and the
    /// resampling budget is exhausted, or a single requested solve hit a
    /// near-singular matrix.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// A validation check failed.
    #[error("validation failure: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            Error::Degenerate(_) => 2,
            Error::Validation(_) => 3,
        }
    }
}
