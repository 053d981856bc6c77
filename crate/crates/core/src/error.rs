use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("invalid augmentation model: {0}")]
    InvalidAugmentation(String),

    #[error("invalid graph weights: eta_u={eta_u}, eta_l={eta_l}")]
    InvalidWeights { eta_u: f64, eta_l: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vertex {0} has zero degree; the normalized adjacency is undefined")]
    ZeroDegree(usize),

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("invalid rank k={k} for n={n}")]
    InvalidRank { k: usize, n: usize },

    #[error("jacobi eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("non-finite loss at iteration {0}")]
    NonFiniteLoss(usize),

    #[error("class index {0} has no examples")]
    EmptyClass(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("k_neighbors={k} must be smaller than the reference count {n}")]
    TooFewReferences { k: usize, n: usize },

    #[error("degenerate regime: {0}")]
    DegenerateRegime(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
