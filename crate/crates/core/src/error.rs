use thiserror::Error;

/// Errors raised by the sampler, the analysis routines and dataset validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid priors, ladder, schedule or model-space bounds.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Malformed or non-finite observations.
    #[error("invalid data: {0}")]
    Data(String),
    /// A model was evaluated outside its domain (e.g. the MGM continuum at x <= 0).
    #[error("domain error: {0}")]
    Domain(String),
    /// Traces do not support the requested estimate.
    #[error("analysis error: {0}")]
    Analysis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
