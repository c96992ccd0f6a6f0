//! The export-maps command: loading images for grid models, per-vertex CSVs
//! for mesh models.

use spcatv::io::{read_model, write_pgm, write_vector_csv};
use spcatv::{Error, Result};

use crate::config::{require, FileConfig};
use crate::structure::{self, Structure};
use crate::ExportMapsArgs;

pub fn run(args: ExportMapsArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let model_dir = require(cfg.resolve_path(args.model, "model"), "model")?;
    let out = require(cfg.resolve_path(args.out, "out"), "out")?;

    let model = read_model(&model_dir)?;
    // Square models can fall back to their own full grid.
    let side = (model.p() as f64).sqrt() as usize;
    let fallback = (side * side == model.p()).then_some(side);
    let structure = structure::resolve(&args.structure, &cfg, fallback)?;
    if structure.p() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: structure.p(),
            actual: model.p(),
        });
    }

    std::fs::create_dir_all(&out)?;
    let what = match &structure {
        Structure::Grid(mask) => {
            for comp in 0..model.k() {
                let path = out.join(format!("component_{comp}.pgm"));
                write_pgm(&path, mask, model.loadings().column(comp))?;
            }
            "PGM image(s)"
        }
        Structure::Mesh(_) => {
            for comp in 0..model.k() {
                let path = out.join(format!("component_{comp}.csv"));
                write_vector_csv(&path, model.loadings().column(comp))?;
            }
            "per-vertex CSV(s)"
        }
    };
    println!("wrote {} {what} to {}", model.k(), out.display());
    Ok(())
}
