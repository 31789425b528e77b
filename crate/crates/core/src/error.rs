use thiserror::Error;

/// Errors raised by the samplers, estimators and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The potential path is too short for the requested coordinate.
    #[error("insufficient path extent while locating {coordinate}")]
    Extent { coordinate: String },

    /// A pathological draw exhausted its step or length budget; the caller may resample.
    #[error("resample: {0}")]
    Resample(String),

    #[error("empty sample")]
    EmptySample,

    #[error("sample of size {got} is below the minimum {min}")]
    TinySample { got: usize, min: usize },

    #[error("contingency grid too sparse: {n} pairs for a {k}x{k} grid (need {need})")]
    SparseCells { n: usize, k: usize, need: usize },

    /// A Lévy path ended before its second coordinate passed the requested level.
    #[error("path horizon reached before passage over {level}")]
    Horizon { level: f64 },

    /// The quantity is undefined for this input (for example a localization gap with no visited valley).
    #[error("mark pool of {size} samples exhausted within one path")]
    PoolExhausted { size: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}
