use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Operands live on different realizations, shapes or masks.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// The caller supplied an argument outside an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A state lies outside the domain of the operator it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver hit its iteration cap.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Model parameters violate their invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Mask construction failed (coarse grid, disconnected domain, empty region).
    #[error("geometry error: {0}")]
    Geometry(String),
}

pub type Result<T> = std::result::Result<T, Error>;
