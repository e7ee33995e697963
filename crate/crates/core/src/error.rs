use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("population cap of {cap} particle slots exceeded at t = {time}")]
    PopulationCap { cap: usize, time: f64 },

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("fixed-point iteration diverged after {iterations} iterations (last sup distance {last_distance:e})")]
    Divergence { iterations: usize, last_distance: f64 },

    #[error("divergent variance: {0}")]
    DivergentVariance(String),

    #[error("matrix not positive semidefinite within jitter budget (needed jitter {needed:e}, budget {budget:e})")]
    Conditioning { needed: f64, budget: f64 },

    #[error("quadrature did not reach tolerance: value {value}, error estimate {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o: {0}")]
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

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
