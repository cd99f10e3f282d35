use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("no beam waist reaches {target} m at {distance} m (diffraction bound {bound} m)")]
    NoWaist { target: f64, distance: f64, bound: f64 },
    #[error("pointing jitter is degenerate (σ_u1² σ_u2² = 0)")]
    DegenerateJitter,
    #[error("aggregated turbulence shape is not positive: {0}")]
    NonPositiveShape(f64),
    #[error("moment matching has negative discriminant {discriminant:e} (E[R^2]={m2:e}, E[R^4]={m4:e}, E[R^6]={m6:e})")]
    NegativeDiscriminant { discriminant: f64, m2: f64, m4: f64, m6: f64 },
    #[error("{what} = {value} is outside [-1e-6, 1 + 1e-6]")]
    OutOfBand { what: &'static str, value: f64 },
    #[error("GML tabulation failed: {0}")]
    Tabulation(String),
    #[error("invalid request: {0}")]
    Request(String),
    #[error(transparent)]
    Specfun(#[from] specfun::SpecfunError),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn config_err(field: &str, message: impl Into<String>) -> CoreError {
    CoreError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}
