use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("rate function outside the supported class: {0}")]
    Domain(String),

    #[error("tail behaviour of the integrand could not be decided: {0}")]
    UnknownTail(String),

    #[error("value {0} is outside the range of the inverse")]
    OutOfRange(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Laplace inversion failed: {0}")]
    InversionFailure(String),

    #[error("model does not satisfy the Cramer condition at theta = {theta}: E[exp(-theta xi_1)] = {mgf}")]
    NotCramer { theta: f64, mgf: f64 },

    #[error("limiting undershoot law degenerates: {0}")]
    DegenerateLimit(String),

    #[error("path has not exploded")]
    NotExploded,

    #[error("explosion probe inconclusive for {inconclusive} of {total} paths")]
    InconclusiveTail { inconclusive: usize, total: usize },

    #[error("(H1) undecidable: {0}")]
    Undecidable(String),

    #[error("boundary at +infinity is not an entrance boundary: {0}")]
    NotEntrance(String),

    #[error("boundary at +infinity is not regular with jump-in at theta = {0}")]
    NotJumpIn(f64),

    #[error("{censored} of {total} paths never crossed the level")]
    CensoredMajority { censored: usize, total: usize },

    #[error("speed law requires a strictly negative mean")]
    ZeroDrift,

    #[error("{0} of the phase-2 runs did not explode")]
    NoExplosionPhase2(usize),

    #[error("insufficient mass: {0}")]
    InsufficientMass(String),

    #[error("neglected small-excursion time {bound} exceeds {budget} of the glued duration")]
    ThresholdTooHigh { bound: f64, budget: f64 },

    #[error("sample too small: need at least {need}, got {got}")]
    TooSmall { need: usize, got: usize },

    #[error("config error at line {line}, field `{field}`: {message}")]
    Config { line: usize, field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
