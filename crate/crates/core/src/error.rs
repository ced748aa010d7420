use thiserror::Error;

use crate::dal::DalSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("curve sets are sampled on different grids")]
    GridMismatch,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pointwise standard deviation {sd:e} at grid index {index} is degenerate")]
    DegenerateVariance { index: usize, sd: f64 },

    #[error("covariance has {available} positive eigenvalues, {requested} requested")]
    RankDeficient { available: usize, requested: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("solver stopped after {iterations} outer iterations (res3 = {res3:e})")]
    MaxIterations {
        iterations: usize,
        res3: f64,
        best: Box<DalSolution>,
    },

    #[error("degrees of freedom leave no residual dimension (n - k*nu = {0:e})")]
    DegenerateDof(f64),

    #[error("selected block {0} has zero norm")]
    ZeroBlock(usize),

    #[error("block norms have zero spread; soft weights are undefined")]
    SoftDegenerate,

    #[error("initial path selected no blocks")]
    EmptyInitialSelection,

    #[error("unsupported Matern smoothness {0}; expected one of 0.5, 1.5, 2.5, 3.5")]
    UnsupportedSmoothness(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input: {0}")]
    Format(String),
}
