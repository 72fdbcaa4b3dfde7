//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    /// A matrix that must be positive definite failed factorization even
    /// after the one permitted jitter retry.
    #[error("matrix factorization failed: {0}")]
    NumericalFailure(&'static str),

    /// Configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A detection or track referenced a class with no parameter record.
    #[error("unknown object class `{0}`")]
    UnknownClass(String),

    /// A text input file could not be parsed. `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Frame timestamps must be strictly increasing.
    #[error("non-monotone timestamps: frame {frame} has t = {t} after t = {prev}")]
    NonMonotoneTime { frame: u64, t: f64, prev: f64 },

    /// The assignment problem had no feasible solution. The cost-matrix
    /// shape guarantees feasibility, so this indicates a solver bug.
    #[error("assignment infeasible: {0}")]
    InfeasibleAssignment(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
