//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A text input (CSV, config) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A requested entity (user, location) does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// Bayesian update impossible: the observation has zero likelihood
    /// under every location of the prior.
    #[error("degenerate observation: zero posterior denominator for location {0}")]
    DegenerateObservation(usize),

    /// Requested column scale exceeds the largest value for which the
    /// analytic policy stays within the privacy budget.
    #[error("infeasible column scale {theta}: limit is {limit}")]
    InfeasibleTheta { theta: f64, limit: f64 },

    /// The policy synthesis linear program has no feasible point for the
    /// requested report rate.
    #[error("synthesis infeasible at beta = {beta}: {msg}")]
    SynthesisInfeasible { beta: f64, msg: String },

    /// The simplex solver exceeded its iteration budget or produced a
    /// solution whose residuals exceed tolerance.
    #[error("numerical failure in LP solve: {0}")]
    NumericalFailure(String),

    /// A metric (coverage, AUC) is undefined on the given input.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
