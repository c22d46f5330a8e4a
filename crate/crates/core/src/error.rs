use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("CFL condition violated at step {step}: dt*max|v|/(2h) = {cfl:.6} > 1")]
    CflViolation { step: usize, cfl: f64 },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("snapshot {index} failed: {source}")]
    Snapshot {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("latent dimension {n}: {source}")]
    Sweep {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("missing forward cache: {0}")]
    MissingCache(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite(_)
            | Error::SolverFailure(_)
            | Error::CflViolation { .. }
            | Error::Divergence { .. } => true,
            Error::Snapshot { source, .. } | Error::Sweep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
