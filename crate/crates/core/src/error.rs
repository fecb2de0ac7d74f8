use thiserror::Error;

/// Errors produced by the numerical kernel, the models and the run driver.
#[derive(Debug, Error)]
pub enum Error {
    /// The wavefunction vanishes (or a slit is hit) so phase and velocity are undefined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change in bracket [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    NoSignChange { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("invalid value for `{field}`: {constraint} (got {value})")]
    InvalidParameter {
        field: &'static str,
        constraint: &'static str,
        value: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient samples: {got} surviving members, at least {need} required")]
    InsufficientSamples { got: usize, need: usize },

    #[error("rejection sampling efficiency {rate:.3e} below {min:.0e}")]
    LowAcceptance { rate: f64, min: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            constraint: "must be finite and > 0",
            value: value.to_string(),
        })
    }
}

pub(crate) fn check_non_negative(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            constraint: "must be finite and >= 0",
            value: value.to_string(),
        })
    }
}
