use thiserror::Error;

use crate::estimators::EstimateTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("matrix is not symmetric (max relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("matrix is rank deficient (|r_{column}{column}| = {diagonal:e}, largest {largest:e})")]
    RankDeficient {
        column: usize,
        diagonal: f64,
        largest: f64,
    },

    /// An iterate became non-finite or exploded in norm.
    #[error("iteration diverged at step {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<EstimateTrace>,
    },

    /// A solver failure inside the iteration, with the iterates gathered so far.
    #[error("iteration failed at step {iteration}: {source}")]
    Iteration {
        iteration: usize,
        source: Box<Error>,
        trace: Box<EstimateTrace>,
    },

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
}

impl Error {
    /// The partial trace attached to iteration failures.
    pub fn trace(&self) -> Option<&EstimateTrace> {
        match self {
            Error::Diverged { trace, .. } | Error::Iteration { trace, .. } => Some(trace),
            _ => None,
        }
    }
}
