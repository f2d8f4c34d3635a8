use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown wavelet family `{0}` (supported: haar, db1..db10)")]
    UnknownWavelet(String),

    #[error("wavelet filter failed validation: {0}")]
    InvalidFilter(String),

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("empty input series")]
    EmptyInput,

    #[error("scale index {requested} exceeds the maximal available scale {max}")]
    ScaleOutOfRange { requested: usize, max: usize },

    #[error("coefficient index ({j}, {k}) is out of range (scale {j} has {count} coefficients)")]
    CoefficientOutOfRange { j: usize, k: usize, count: usize },

    #[error("invalid scale range: {0}")]
    InvalidRange(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("solver did not converge after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    #[error(
        "memory parameter {d} is outside the admissible window ({lower}, {upper}] for wavelet \
         `{wavelet}`; use a wavelet with more vanishing moments"
    )]
    OutsideDomain {
        d: f64,
        lower: f64,
        upper: f64,
        wavelet: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("circulant embedding is not nonnegative definite after {doublings} doublings (min eigenvalue {min_eigenvalue:e})")]
    EmbeddingFailed {
        doublings: usize,
        min_eigenvalue: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
