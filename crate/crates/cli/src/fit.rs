//! The fit command: one dataset, one model directory.

use spcatv::io::write_model;
use spcatv::{Error, Model, Result, Weights};

use crate::config::{require, FileConfig};
use crate::{data, structure, FitArgs};

pub fn run(args: FitArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let data_path = require(cfg.resolve_path(args.data, "data"), "data")?;
    let out = require(cfg.resolve_path(args.out, "out"), "out")?;
    let k = cfg.resolve_or(args.k, "k", 3)?;
    let eps = cfg.resolve_or(args.eps, "eps", 1e-4)?;
    let seed = cfg.resolve_or(args.seed, "seed", 0)?;
    let global_weight = require(
        cfg.resolve(args.global_weight, "global-weight")?,
        "global-weight",
    )?;
    let l1_ratio = cfg.resolve_or(args.l1_ratio, "l1-ratio", 0.0)?;
    let tv_ratio = cfg.resolve_or(args.tv_ratio, "tv-ratio", 0.0)?;

    let dataset = data::load_single(&data_path)?;
    let structure = structure::resolve(&args.structure, &cfg, dataset.side)?;
    if structure.p() != dataset.x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: structure.p(),
            actual: dataset.x.ncols(),
        });
    }
    let op = structure.operator()?;
    let weights = Weights::from_ratios(global_weight, l1_ratio, tv_ratio)?;
    let model = Model::fit(dataset.x.view(), &op, k, weights, eps, seed)?;
    write_model(&out, &model)?;

    let ev: Vec<String> = model
        .explained_variance()
        .iter()
        .map(|v| format!("{v:.3e}"))
        .collect();
    println!(
        "fitted {} component(s) on {} (p={}), explained variance [{}]{}; model written to {}",
        model.k(),
        dataset.name,
        model.p(),
        ev.join(", "),
        if model.truncated() {
            " [truncated: a component collapsed to zero]"
        } else {
            ""
        },
        out.display()
    );
    Ok(())
}
