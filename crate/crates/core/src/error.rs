use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grid too coarse: dt = {dt:e} s, need dt <= {limit:e} s")]
    GridTooCoarse { dt: f64, limit: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical instability at t = {t:e} s (|state| = {magnitude:e})")]
    Unstable { t: f64, magnitude: f64 },

    #[error("spectrum has no half-maximum crossing inside the transform window")]
    NoHalfMaxCrossing,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit did not converge after {iterations} iterations (rms residual {rms:e})")]
    FitNotConverged { iterations: usize, rms: f64 },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("tag stream has no events on channel {0}")]
    MissingChannel(u8),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects NaN and infinities with a named parameter error.
pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be >= 0, got {value}")))
    }
}
