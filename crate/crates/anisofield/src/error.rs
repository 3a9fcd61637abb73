use thiserror::Error;

/// Errors raised by model construction, classification and numerics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("admissibility violated: Q = {q_sum} must lie in (1, 2)")]
    InvalidQ { q_sum: f64 },

    #[error("boundary case rejected: {what} = {value} is within {margin:e} of {boundary}")]
    Boundary {
        what: String,
        value: f64,
        boundary: f64,
        margin: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("existence condition violated for {family}: {condition}")]
    Existence { family: String, condition: String },

    #[error("truncation budget not met: {0}")]
    Truncation(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn is_boundary(&self) -> bool {
        matches!(self, Error::Boundary { .. })
    }
}
