use crate::solver::SolverTrace;

/// Errors shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mask or mesh selects zero features.
    #[error("no features: the structure selects zero cells")]
    EmptyMask,

    /// Vector or matrix length does not match what the operation expects.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A mesh violates its structural invariants.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The inner objective became non-finite, which indicates a step-size bug.
    #[error("divergence: objective became non-finite")]
    Divergence,

    /// An iteration cap was exhausted before the stopping rule fired.
    /// Carries the solver trace accumulated so far when one exists.
    #[error("no convergence: {stage} cap of {limit} exceeded")]
    NonConvergence {
        stage: &'static str,
        limit: usize,
        trace: Option<Box<SolverTrace>>,
    },

    /// `Xv = 0`: the loading no longer projects onto the data.
    #[error("degenerate loading: Xv = 0")]
    DegenerateLoading,

    /// A file's contents do not parse as the expected format.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
