use thiserror::Error;

/// All failures surfaced by the toolkit.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: schema violations, socket imbalance, rank-deficient
    /// generators, idle bits, bad arguments.
    #[error("validation error: {0}")]
    Validation(String),

    /// An exhaustive enumeration would exceed the compiled-in size limits.
    #[error("capacity exceeded: {what} is {actual}, limit is {limit}")]
    Capacity {
        what: String,
        actual: usize,
        limit: usize,
    },

    /// The requested analysis does not apply to this ensemble.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A numerical self-check failed. Indicates a bug, not bad input.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn capacity(what: impl Into<String>, actual: usize, limit: usize) -> Self {
        Error::Capacity {
            what: what.into(),
            actual,
            limit,
        }
    }

    /// Process exit code for the CLI: 1 validation, 2 capacity, 3 refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 2,
            Error::Hypothesis(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
