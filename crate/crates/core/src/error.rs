use thiserror::Error;

/// Errors produced by mechanisms, estimators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An exponential-time routine was asked to enumerate more than its guard allows.
    #[error("scale limit exceeded: {what} needs {required} elements, limit is {limit}")]
    Scale {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error("privacy budget exceeded: requested epsilon {requested}, remaining {remaining}")]
    BudgetExceeded { requested: f64, remaining: f64 },

    /// A pipeline stage failed after part of the budget had already been consumed.
    #[error("{stage} failed after spending epsilon {spent_epsilon}: {source}")]
    Partial {
        stage: &'static str,
        spent_epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
