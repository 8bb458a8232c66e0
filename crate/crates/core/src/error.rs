use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("site {site} outside the window 1..={max}")]
    OutOfWindow { site: usize, max: usize },

    #[error("walk left the environment window (x_max = {x_max}) at step {step}")]
    EnvironmentExhausted { x_max: usize, step: u64 },

    #[error("malformed path at index {index}: {reason}")]
    MalformedPath { index: usize, reason: String },

    #[error("valley with depth {threshold} does not close within {window} sites")]
    ValleyNotClosed { threshold: f64, window: usize },

    #[error("criterion undefined: {0}")]
    UndefinedCriterion(String),

    #[error("objective returned {value} at {at:?}")]
    Evaluation { at: Vec<f64>, value: f64 },

    #[error("moment equation has no solution (w = {w})")]
    NoSolution { w: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rejection sampler exhausted after {attempts} attempts")]
    SamplerExhausted { attempts: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
