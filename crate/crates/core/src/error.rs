use thiserror::Error;

/// Errors raised by the estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported derivative order {0} (supported: 1, 2)")]
    UnsupportedOrder(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {column} has zero variance and cannot be standardized")]
    DegenerateColumn { column: usize },

    #[error("fold {fold} has a degenerate training response (all observations identical)")]
    FoldDegeneracy { fold: usize },

    #[error("linear program solver stalled after {iterations} iterations")]
    SolverStalled { iterations: usize },

    #[error("internal linear program reported {0}")]
    LpFailure(&'static str),

    #[error("unknown {kind} `{value}`")]
    UnknownName { kind: &'static str, value: String },
}

pub type Result<T> = std::result::Result<T, Error>;
