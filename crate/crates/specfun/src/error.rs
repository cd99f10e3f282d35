use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("pole of the gamma function at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("contour planning failed: {0}")]
    ContourPlanning(String),

    #[error("no convergence: value {value:e}, error estimate {error_estimate:e}, tolerance {tolerance:e}")]
    NonConvergence {
        value: f64,
        error_estimate: f64,
        tolerance: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

pub type Result<T> = std::result::Result<T, SpecfunError>;
