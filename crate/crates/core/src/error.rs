use std::fmt;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// Flow scaling would produce a fractional number of identical trips.
    #[error("{group} has {count} trips; ratio {ratio} gives {scaled} trips, which is not an integer")]
    Integrality {
        group: TripGroup,
        count: u64,
        ratio: f64,
        scaled: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A group of trips sharing departure time and (optionally) distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripGroup {
    pub depart_time_s: f64,
    pub distance_km: Option<f64>,
}

impl fmt::Display for TripGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.distance_km {
            Some(x) => write!(f, "group (T={} s, X={} km)", self.depart_time_s, x),
            None => write!(f, "group (T={} s)", self.depart_time_s),
        }
    }
}

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

pub(crate) fn ensure_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {value}")))
    }
}
