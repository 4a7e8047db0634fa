use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped by what went wrong rather than by which module
/// raised them, so callers (notably the CLI) can map them onto exit codes
/// with [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("mesh invariant violated: {0}")]
    Invariant(String),

    #[error("conformity error: {0}")]
    Conformity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("operator is not positive definite at iteration {iteration} ({what} = {value:e})")]
    Indefinite {
        iteration: usize,
        what: &'static str,
        value: f64,
    },

    #[error("singular local system: {0}")]
    Singular(String),

    #[error("{0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Usage(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Numerical,
    Mesh,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Usage(_) => Category::Usage,
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::Invariant(_)
            | Error::Conformity(_)
            | Error::Unsupported(_) => Category::Mesh,
            Error::NotPositiveDefinite { .. }
            | Error::Indefinite { .. }
            | Error::Singular(_)
            | Error::Numerical(_) => Category::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
