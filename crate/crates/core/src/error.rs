use thiserror::Error;

/// Errors raised by the modulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "open-channel area covers the whole membrane (z = {z}); permeability must stay below 1"
    )]
    UnphysicalPermeability { z: f64 },

    #[error("transfer-function denominator vanished at s = {re} + {im}i")]
    PoleProximity { re: f64, im: f64 },

    #[error("numerical inversion failed at t = {t}: {reason}")]
    Inversion { t: f64, reason: String },

    #[error("time {t} is outside the series span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("root bracketing failed for n = {n}, h = {h}")]
    Bracketing { n: usize, h: f64 },

    #[error("time {t} is below the smallest supported series time {min}")]
    Unsupported { t: f64, min: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
