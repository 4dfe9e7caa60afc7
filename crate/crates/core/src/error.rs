use thiserror::Error;

use crate::grid::Fixation;

/// Errors raised by the planning engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fixation ({pan}, {tilt}) is outside a {pan_blocks}x{tilt_blocks} grid")]
    OutOfBounds {
        pan: usize,
        tilt: usize,
        pan_blocks: usize,
        tilt_blocks: usize,
    },

    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid sensor model: {0}")]
    InvalidSensor(String),

    #[error("frame fixation {frame:?} does not match belief fixation {belief:?}")]
    FixationMismatch { frame: Fixation, belief: Fixation },

    #[error("frame rejected: {0}")]
    RejectedFrame(String),

    #[error("evidence contradicts a deterministic sensor at block ({pan}, {tilt})")]
    Contradiction { pan: usize, tilt: usize },

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

/// Deserializes JSON, reporting the failing field path on error.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
