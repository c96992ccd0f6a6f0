//! Sparse principal components with elastic-net and total-variation penalties
//! on voxel grids and triangle meshes.
//!
//! The building blocks: a stacked group operator encoding spatial structure
//! ([`structure`]), Nesterov smoothing of the group penalty ([`smoothing`]),
//! a FISTA/CONESTA solver with duality-gap certificates ([`solver`]), and
//! rank-one alternating minimization with deflation ([`spca`]).
//!
//! Everything numeric is generic over the scalar via [`scalar::Real`]; the
//! aliases at the crate root fix `f64` for everyday use.

pub mod error;
pub mod io;
pub mod metrics;
pub mod scalar;
pub mod smoothing;
pub mod solver;
pub mod spca;
pub mod structure;
pub mod synthdata;

pub use error::{Error, Result};
pub use metrics::{
    dice_index, loading_mse, match_components, reconstruction_error, stability_dice, MatchResult,
    StabilityDice,
};
pub use scalar::Real;
pub use solver::{FistaRun, PenaltyWeights, RidgeSmoothedProblem, SolverTrace, TraceRecord};
pub use spca::{deflate, fit_component, update_u, ComponentFit, SpcaModel};
pub use structure::{
    build_grid_tv_operator, build_mesh_tv_operator, GridMask, GroupBlock, GroupLinearOperator,
    TriangleMesh,
};
pub use synthdata::{generate_dataset, make_loadings, SyntheticDataset};

/// Double-precision dense vector.
pub type Vector = ndarray::Array1<f64>;
/// Double-precision dense matrix.
pub type Matrix = ndarray::Array2<f64>;
/// Double-precision structure operator.
pub type Operator = structure::GroupLinearOperator<f64>;
/// Double-precision penalty weights.
pub type Weights = solver::PenaltyWeights<f64>;
/// Double-precision fitted model.
pub type Model = spca::SpcaModel<f64>;
