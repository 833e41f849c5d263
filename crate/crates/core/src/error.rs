use std::path::PathBuf;

use crate::point::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("points must have at least one coordinate")]
    EmptyPoint,

    #[error("non-finite value {value} produced by {source_name}")]
    NonFinite { source_name: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("objective has no exact gradient oracle")]
    MissingGradient,

    #[error("objective has no Lipschitz constant")]
    MissingLipschitz,

    #[error("value-evaluation budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },

    /// No backtrack up to the cap passed the inexactness check, which signals
    /// that the gradient at the extrapolation point is (numerically) zero.
    #[error("no step size passed the inexactness check after {backtracks} backtracks")]
    StationaryOrBudget { best: Point, backtracks: u32 },

    #[error("inexact prox did not certify within {iterations} inner iterations (bound {bound:e})")]
    ProxNotCertified { best: Point, bound: f64, iterations: usize },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
