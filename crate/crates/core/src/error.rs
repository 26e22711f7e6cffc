use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate ensemble")]
    DegenerateEnsemble,

    #[error("degenerate temperature")]
    DegenerateTemperature,

    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("particle weight must be positive and finite, got {0}")]
    InvalidWeight(f64),

    #[error("velocity component {component} of particle {particle} is not finite")]
    NonFiniteVelocity { particle: usize, component: usize },

    #[error("velocity buffer length {len} is not a multiple of dimension {dim}")]
    RaggedVelocities { len: usize, dim: usize },

    #[error("vectors have mismatched dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error("sigma is not a unit vector (|sigma| = {0})")]
    NonUnitSigma(f64),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("candidate relative speed {relative_speed} exceeds rate majorant {majorant}")]
    MajorantViolation { relative_speed: f64, majorant: f64 },

    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("{0} is not ordered")]
    Unordered(&'static str),

    #[error("histogram grids do not match")]
    GridMismatch,

    #[error("histogram is not normalized (mass = {0})")]
    Unnormalized(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-positive value {value} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("exponential weight overflow: a|xi| = {0} exceeds 700")]
    ExpOverflow(f64),

    #[error("moment of order {0} is missing")]
    MissingMoment(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(&'static str),

    #[error("config error at line {line}, field `{field}`: {message}")]
    Config {
        line: usize,
        field: String,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("malformed data file {file}: {message}")]
    Format { file: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
