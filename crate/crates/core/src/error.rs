use thiserror::Error;

use crate::harness::config::ConfigError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameters handed to a library operation.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Parse(#[from] ConfigError),

    /// Mismatched sizes, grids or times between arguments.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid state: {field}[{index}] = {value:e} ({reason})")]
    InvalidState {
        field: &'static str,
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("Newton iteration failed at dt = {dt:e}: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence {
        dt: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("time step fell below dt_min at t = {t}: dt = {dt:e}\n{dump}")]
    StepTooSmall { t: f64, dt: f64, dump: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
