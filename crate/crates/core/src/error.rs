use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("point {point:?} is not on the boundary (distance {distance:e})")]
    NotOnBoundary { point: Vec<f64>, distance: f64 },

    #[error("point {point:?} lies outside the band where the distance function is smooth")]
    OutsideSmoothBand { point: Vec<f64> },

    #[error("data function is missing metadata field `{0}`")]
    MissingMetadata(&'static str),

    #[error("{solver} did not converge after {iterations} iterations (last update {last_update:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        last_update: f64,
    },

    #[error("Dirichlet ladder exhausted without saturation; interior changes {profile:?}")]
    LadderExhausted { profile: Vec<f64> },

    #[error("rate fit needs at least {needed} rows with positive error, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
