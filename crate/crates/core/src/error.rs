use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the multigrid library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid level index {0} (supported range is 0..=12)")]
    InvalidLevel(i64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("point is infeasible at index {index}: {lower} <= {value} <= {upper} violated")]
    Infeasible {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("empty feasible set: bounds cannot meet the equality target {target}")]
    EmptyFeasibleSet { target: f64 },

    #[error("unbounded descent direction: step doubled {0} times without a sign change")]
    UnboundedDescent(usize),

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),

    #[error("singular coarse Gram matrix")]
    SingularGram,

    #[error("variant {variant} cannot be used with problem `{problem}`: {reason}")]
    VariantMismatch {
        variant: String,
        problem: String,
        reason: &'static str,
    },

    #[error("need at least 3 recorded errors to estimate a rate, got {0}")]
    TooFewErrors(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
