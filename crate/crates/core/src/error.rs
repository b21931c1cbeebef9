use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is outside its domain.
    #[error("invalid {name}: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    /// A record in an input file could not be parsed or violates an invariant.
    #[error("line {line}, column `{column}`: {reason}")]
    Parse {
        line: u64,
        column: String,
        reason: String,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error("no records left after applying exclusions")]
    EmptySelection,

    #[error("insufficient cycles: found {found} complete cycles after warm-up, need at least {required}")]
    InsufficientCycles { found: usize, required: usize },

    #[error("numerical blow-up at t={t:.3} s: queue delay {qdelay:.3} s exceeds 100x target")]
    NumericalBlowUp { t: f64, qdelay: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error stems from bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput { .. }
                | Error::Parse { .. }
                | Error::Unsupported(_)
                | Error::EmptySelection
        )
    }
}

/// Rejects NaN/inf and values that are not strictly positive.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}

/// Multiplicative-decrease factor, open interval (0, 1).
pub(crate) fn ensure_decrease_factor(b: f64) -> Result<f64> {
    if b.is_finite() && b > 0.0 && b < 1.0 {
        Ok(b)
    } else {
        Err(Error::invalid("b", format!("must lie in (0, 1), got {b}")))
    }
}
