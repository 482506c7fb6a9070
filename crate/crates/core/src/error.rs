use std::path::PathBuf;

use thiserror::Error;

use crate::sim::Trajectory;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The birth-death chain (or the network) has no stationary law for these parameters.
    #[error("non-ergodic parameters: {0}")]
    NonErgodic(String),

    #[error("measure is not normalisable: {0}")]
    NonNormalizable(String),

    #[error("condition cannot be satisfied: {0}")]
    ConditionUnsatisfiable(String),

    /// Mass keeps escaping to infinity; the adaptive support hit its hard cap.
    #[error("truncation overflow: support would exceed {cap} states")]
    TruncationOverflow { cap: usize },

    #[error("event budget of {events} exhausted at time {reached}")]
    BudgetExceeded {
        events: u64,
        reached: f64,
        partial: Option<Box<Trajectory>>,
    },

    #[error("traffic equations have no unique solution: {0}")]
    NoUniqueSolution(String),

    #[error("operation not supported for this kernel: {0}")]
    UnsupportedKernel(String),

    #[error("no certificate candidate: {0}")]
    NoCandidate(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for the failures a caller should treat as "ran out of room" rather than bad input.
    pub fn is_resource_exhaustion(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. } | Error::TruncationOverflow { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
