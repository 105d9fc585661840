use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A point or set lies outside the state space of a model.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested operation is not defined for this model or measure.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Adaptive quadrature exhausted its budget.
    #[error("quadrature did not converge: estimate {estimate}, error estimate {error}")]
    Quadrature { estimate: f64, error: f64 },

    /// A numeric invariant was violated (non-finite samples, negative energies, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Bad or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
