use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("{uncertain} uncertain entries exceed the vertex enumeration limit of {limit}")]
    TooManyVertices { uncertain: usize, limit: usize },

    #[error("counter-example duplicates stored sample #{index} (distance {distance:.3e})")]
    DuplicateCounterexample { index: usize, distance: f64 },

    #[error("LMI solver did not converge: {0}")]
    SolverStalled(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub(crate) fn dim_err(what: impl Into<String>) -> Error {
    Error::Dimension(what.into())
}
