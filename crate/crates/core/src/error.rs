use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("weight is not green: {0}")]
    NotGreen(String),
    #[error("weight is divergent (spectral radius of Q is {radius:.6})")]
    Divergent { radius: f64 },
    #[error("refused: {0}")]
    Refused(String),
    #[error("loop erasure does not match the given self-avoiding walk")]
    Mismatch,
    #[error("Laplacian walk is trapped at vertex {0}")]
    Trapped(usize),
    #[error("instance too large: {0}")]
    Size(String),
    #[error("precision: {0}")]
    Precision(String),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("sampler starved after {0} rejected attempts")]
    Starvation(u64),
    #[error("vertex {0} cannot reach the boundary")]
    Irreducible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("truncation tail {tail:e} exceeds tolerance {tol:e}; increase the cutoff")]
    Tail { tail: f64, tol: f64 },
    #[error("insufficient samples: {got} < {need}")]
    InsufficientSamples { got: usize, need: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
