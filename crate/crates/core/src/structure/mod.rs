//! Spatial structure: masked voxel grids, triangle meshes, and the
//! group-structured linear operator whose per-group norms define the
//! total-variation penalty.

mod grid;
mod mesh;
mod operator;

pub use grid::{build_grid_tv_operator, GridMask};
pub use mesh::{build_mesh_tv_operator, TriangleMesh};
pub use operator::{GroupBlock, GroupLinearOperator, SPECTRAL_TOL};
