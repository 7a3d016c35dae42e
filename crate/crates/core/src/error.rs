use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The margin problem has no feasible point. `point` and `class` name one
    /// constraint that cannot be satisfied together with the others.
    #[error("infeasible margin problem: constraint (point {point}, class {class}) cannot be met")]
    Infeasible { point: usize, class: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gradient descent diverged at step {step}")]
    Diverged {
        step: usize,
        last_finite: Box<crate::model::Predictor>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
