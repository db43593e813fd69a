use thiserror::Error;

use crate::picard::PicardReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    /// Two fields that must share a grid (or a component count) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("point {point:?} lies outside the closed domain")]
    Domain { point: Vec<f64> },

    /// An operation's input contract was not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {final_residual:.3e})")]
    Solver {
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("advective CFL number {cfl:.3} exceeds the hard limit {limit}")]
    Cfl { cfl: f64, limit: f64 },

    #[error("density positivity certificate violated at level {level}, node {node}: rho = {value:e} < bound {bound:e}")]
    Positivity {
        level: usize,
        node: usize,
        value: f64,
        bound: f64,
    },

    #[error("Picard iteration diverged after {} sweeps", .0.sweeps.len())]
    Diverged(Box<PicardReport>),

    #[error("Picard iteration did not reach psi_tol within {} sweeps", .0.sweeps.len())]
    NotConverged(Box<PicardReport>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {constraint}")]
    Validation { key: String, constraint: String },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
