use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature level must be at least 1 (got {0})")]
    InvalidLevel(usize),

    #[error("alpha must exceed -1 (got {0})")]
    InvalidAlpha(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rule kind {kind} cannot be rescaled to {dist}")]
    KindMismatch { kind: String, dist: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("grid of {points} points (K^D = {level}^{dim}) exceeds the point budget {budget}")]
    PointBudgetExceeded {
        level: usize,
        dim: usize,
        points: u128,
        budget: u64,
    },

    #[error("integrand returned a non-finite value {value} at point {point:?}")]
    NonFiniteEvaluation { point: Vec<f64>, value: f64 },

    #[error("numeric domain error: {0}")]
    Domain(String),

    #[error("estimand mismatch: {0}")]
    EstimandMismatch(String),

    #[error("no closed-form reference available for scenario '{0}'")]
    MissingReference(String),
}

impl Error {
    /// Numeric-domain failures (degenerate probabilities, survival underflow)
    /// as opposed to invalid input.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::NonFiniteEvaluation { .. })
    }
}
