//! Resolves the --mask/--mesh/--grid choice into a TV operator.

use spcatv::io::{read_mask, read_mesh};
use spcatv::structure::{build_grid_tv_operator, build_mesh_tv_operator, GridMask, TriangleMesh};
use spcatv::{Error, Operator, Result};

use crate::config::FileConfig;
use crate::StructureArgs;

/// The spatial layout features live on.
#[derive(Debug)]
pub enum Structure {
    Grid(GridMask),
    Mesh(TriangleMesh),
}

impl Structure {
    pub fn p(&self) -> usize {
        match self {
            Structure::Grid(mask) => mask.p(),
            Structure::Mesh(mesh) => mesh.vertices().len(),
        }
    }

    pub fn operator(&self) -> Result<Operator> {
        match self {
            Structure::Grid(mask) => build_grid_tv_operator(mask),
            Structure::Mesh(mesh) => build_mesh_tv_operator(mesh),
        }
    }
}

/// Parses `WxH` grid dimensions.
pub fn parse_grid_dims(raw: &str) -> Result<(usize, usize)> {
    let err = || Error::InvalidParameter(format!("--grid expects WxH, got {raw:?}"));
    let (w, h) = raw.split_once(['x', 'X']).ok_or_else(err)?;
    let w: usize = w.trim().parse().map_err(|_| err())?;
    let h: usize = h.trim().parse().map_err(|_| err())?;
    if w == 0 || h == 0 {
        return Err(err());
    }
    Ok((w, h))
}

/// Applies flag-over-config resolution and builds the structure. At most one
/// source may be set; with none set, square datasets fall back to their own
/// full `side x side` grid.
pub fn resolve(
    args: &StructureArgs,
    cfg: &FileConfig,
    fallback_side: Option<usize>,
) -> Result<Structure> {
    let mask = cfg.resolve_path(args.mask.clone(), "mask");
    let mesh = cfg.resolve_path(args.mesh.clone(), "mesh");
    let grid = cfg.resolve::<String>(args.grid.clone(), "grid")?;

    let given =
        usize::from(mask.is_some()) + usize::from(mesh.is_some()) + usize::from(grid.is_some());
    if given > 1 {
        return Err(Error::InvalidParameter(
            "--mask, --mesh, and --grid are mutually exclusive".into(),
        ));
    }

    if let Some(path) = mask {
        return Ok(Structure::Grid(read_mask(&path)?));
    }
    if let Some(path) = mesh {
        return Ok(Structure::Mesh(read_mesh(&path)?));
    }
    if let Some(raw) = grid {
        let (w, h) = parse_grid_dims(&raw)?;
        return Ok(Structure::Grid(GridMask::full_2d(w, h)?));
    }
    if let Some(side) = fallback_side {
        return Ok(Structure::Grid(GridMask::full_2d(side, side)?));
    }
    Err(Error::InvalidParameter(
        "no structure given: pass --mask, --mesh, or --grid WxH".into(),
    ))
}
