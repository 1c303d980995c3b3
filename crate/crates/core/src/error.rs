use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum CranError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("RRH placement still violates separation floors after {attempts} attempts")]
    PlacementInfeasible { attempts: usize },

    #[error("distance must be positive, got {0}")]
    NonpositiveDistance(f64),

    #[error("power must be nonnegative, got {0}")]
    NegativePower(f64),

    #[error("singular matrix in {context} (condition number {cond:.3e})")]
    SingularMatrix { context: &'static str, cond: f64 },

    #[error("matrix is not Hermitian (relative residual {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("subproblem solver failed: {0}")]
    SubproblemFailed(String),

    #[error("grid search dimension {dim} exceeds limit {limit}")]
    GridTooLarge { dim: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CranError>;
