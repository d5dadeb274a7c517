use std::path::Path;

/// Crate-wide error type.
///
/// Variants split into two families that callers care about: input problems
/// (bad files, inconsistent dimensions, infeasible specifications) and
/// numerical failures (non-convergence, cycling, singularities). The CLI maps
/// the former to exit code 2 and the latter to exit code 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("invalid problem: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }

    pub fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
