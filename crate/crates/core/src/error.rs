use std::io;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unexpected symbol {symbol:?} at position {pos}")]
    BadSymbol { pos: usize, symbol: char },
}

impl ParseError {
    pub(crate) fn shift(self, by: usize) -> Self {
        match self {
            ParseError::BadSymbol { pos, symbol } => ParseError::BadSymbol { pos: pos + by, symbol },
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid machine config: {0}")]
    Machine(String),
    #[error("invalid agent spec {spec:?}: {reason}")]
    Agent { spec: String, reason: String },
    #[error("agent kind {0} requires an external reference implementation and is not built in")]
    Unimplemented(String),
    #[error("line {line}: {reason}")]
    File { line: usize, reason: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
    #[error(transparent)]
    Estimator(#[from] crate::estimator::EstimatorError),
    #[error("run interrupted after {0} batches (checkpoint written)")]
    Interrupted(usize),
}

impl Error {
    /// Config and input-validation failures, as opposed to runtime IO.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse(_) | Error::Sampler(_) | Error::Estimator(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
