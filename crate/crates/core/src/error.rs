use thiserror::Error;

/// Errors produced by simulation, likelihood evaluation, fitting and the
/// numerical verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite state encountered at fine-grid step {step}")]
    NonFiniteState { step: usize },

    #[error("non-positive diffusion value at increment {index}")]
    NonPositiveDiffusion { index: usize },

    #[error("jump log-density diverged at detected jump {index}")]
    JumpDensityDiverged { index: usize },

    #[error("objective was not finite at any restart point")]
    NoFiniteObjective,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("jump tail bound F(z) <= C exp(-u|z|) violated at z = {z}")]
    TailBound { z: f64 },

    #[error("replication {index} failed: {source}")]
    Replication { index: usize, source: Box<Error> },

    #[error("all candidates failed to fit: {0}")]
    AllCandidatesFailed(String),

    #[error("csv parse error: {0}")]
    CsvParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
