use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature did not converge: requested {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },

    /// An operation was called on a profile of the wrong family.
    #[error("profile kind error: expected {expected}, got {got}")]
    Kind {
        expected: &'static str,
        got: &'static str,
    },

    /// A structural inequality of the potential failed at a witness point.
    #[error("certification failed: {inequality} violated at t = {witness_t} (margin {margin:e})")]
    Certification {
        inequality: String,
        witness_t: f64,
        margin: f64,
    },

    /// A pointwise check failed at a witness location.
    #[error("check failed: {check} at {witness:?} (margin {margin:e})")]
    Check {
        check: String,
        witness: Vec<f64>,
        margin: f64,
    },

    /// A precondition on the input field does not hold.
    #[error("precondition violated: {reason} ({} offending nodes)", .nodes.len())]
    Precondition {
        reason: String,
        nodes: Vec<Vec<f64>>,
    },

    /// The iterative solver ran out of iterations.
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Box<crate::grid::GridField>,
    },

    /// No pair of barrier shifts traps the field inside the ball.
    #[error("field is not trapped between shifted barriers: {0}")]
    NotTrapped(String),

    /// Malformed field or node-set file.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
