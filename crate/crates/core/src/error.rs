use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid number literal `{0}`")]
    BadNumber(String),

    #[error(
        "interval [{lo}, {hi}] with grid_n = {grid_n} is malformed (need lo < hi, grid_n >= 2)"
    )]
    BadInterval { lo: f64, hi: f64, grid_n: usize },

    #[error("point label `{label}` declared with conflicting values")]
    ConflictingLabel { label: String },

    #[error("points `{a}` and `{b}` carry the same numeric value under different labels")]
    ConflictingValue { a: String, b: String },

    #[error("unknown point `{0}`")]
    UnknownPoint(String),

    #[error("distance entry ({x}, {y}) is invalid: {reason}")]
    BadDistanceEntry {
        x: String,
        y: String,
        reason: String,
    },

    #[error("no distance available for ({x}, {y}): no entry and no fallback formula")]
    UnresolvableDistance { x: String, y: String },

    #[error("control function has no value for ({x}, {y})")]
    MissingControl { x: String, y: String },

    #[error("control function yields {value} < 1 at ({x}, {y})")]
    ControlBelowOne { x: String, y: String, value: f64 },

    #[error("mapping has no image for `{0}`")]
    MissingImage(String),

    #[error("registered mapping `{0}` is unknown or has bad parameters")]
    BadMapping(String),

    #[error("invalid contraction constants: {0}")]
    BadConstants(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
