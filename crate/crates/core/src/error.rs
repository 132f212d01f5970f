use thiserror::Error;

use crate::model::ModelIssue;

pub type Result<T> = std::result::Result<T, PricerError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricerError {
    #[error("invalid market model: {}", join_issues(.0))]
    InvalidModel(Vec<ModelIssue>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The closed-form distance only covers an axis-aligned constraint image.
    #[error("constraint image is not axis-aligned; use the general distance routine")]
    NonAxisAligned,

    #[error("empty search grid")]
    EmptyGrid,

    #[error("marginal utility never crosses 1 within the bracket growth limit")]
    DualBracket,

    #[error("Picard iteration did not converge at time step {step} (residual {residual:.3e})")]
    PicardNonConvergence { step: usize, residual: f64 },

    #[error("penalty stagnation: complementarity residual went from {first:.3e} to {last:.3e}")]
    PenaltyStagnation { first: f64, last: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("query point (t={t}, S={s}) lies outside the grid hull")]
    OutOfHull { t: f64, s: f64 },

    #[error("ill-conditioned regression: {0}")]
    IllConditioned(String),

    #[error("replication is only defined without constraints and ambiguity: {0}")]
    ReplicationRefused(String),

    #[error("convergence fit needs at least 3 positive error points, got {0}")]
    DegenerateFit(usize),
}

fn join_issues(issues: &[ModelIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
