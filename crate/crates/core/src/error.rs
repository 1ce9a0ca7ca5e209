use thiserror::Error;

/// Errors raised by the simulator and its reference solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("agent order inverted between agents {left} and {right}; reduce dt")]
    OrderInversion { left: usize, right: usize },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("time step {dt:e} violates stability bound; need dt <= {required:e}")]
    Cfl { dt: f64, required: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
