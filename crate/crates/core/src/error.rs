use thiserror::Error;

use crate::sequential::Trace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Factorization failed even at the largest jitter on the ladder.
    #[error(
        "correlation matrix is ill-conditioned at jitter {jitter:e}; closest training points are \
         #{} and #{} (scaled distance {distance:e})", closest.0, closest.1
    )]
    IllConditioned {
        jitter: f64,
        closest: (usize, usize),
        distance: f64,
    },

    #[error("no admissible candidate: {0}")]
    Selection(String),

    #[error("fit failed: {message} (best shape {shape}, scale {scale}, location {location})")]
    FitFailure {
        message: String,
        shape: f64,
        scale: f64,
        location: f64,
    },

    #[error("simulator evaluation failed: {0}")]
    Evaluation(String),

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{what} has {size} points, exceeding the cap of {cap}")]
    Size { what: String, size: usize, cap: usize },

    #[error("sequential run aborted after {} iterations: {cause}", trace.records.len())]
    RunAborted { cause: Box<Error>, trace: Box<Trace> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// The error at the root of an aborted run, or `self`.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::RunAborted { cause, .. } => cause.root_cause(),
            other => other,
        }
    }
}
