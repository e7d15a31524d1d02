use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:.3e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("eigendecomposition failed to converge after {iterations} iterations")]
    EigenFailed { iterations: usize },

    #[error("matrix is numerically singular: eigenvalue {eigenvalue:.6e} below threshold {threshold:.6e}")]
    Singular { eigenvalue: f64, threshold: f64 },

    #[error("matrix is ill-conditioned: condition number {cond:.3e} exceeds {limit:.0e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("column {name} is constant; correlation is undefined for it")]
    ConstantColumn { name: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("gauge matrix Λ'S⁻¹Λ is singular; loadings are rank-deficient")]
    RankDeficientGauge,

    #[error("weight matrix is rank-deficient; B'SB is singular")]
    RankDeficientWeights,

    #[error("uniqueness for variable {name} is zero; Bartlett weights are undefined")]
    ZeroUniqueness { name: String },

    #[error("an orthogonal factor score predictor only makes sense for orthogonal factors; takeuchi requires orthogonal rotation mode")]
    OrthogonalPredictorObliqueMode,

    #[error("criterion is undefined on all-zero loadings")]
    DegenerateLoadings,

    #[error("rotation failed on all starts: {0}")]
    RotationFailed(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
