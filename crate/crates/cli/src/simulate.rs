//! The simulate command: writes numbered synthetic dataset directories.

use spcatv::io::write_dataset;
use spcatv::synthdata::generate_dataset;
use spcatv::Result;

use crate::config::{require, FileConfig};
use crate::SimulateArgs;

pub fn run(args: SimulateArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let count = cfg.resolve_or(args.count, "count", 1)?;
    let n = cfg.resolve_or(args.n, "n", 200)?;
    let side = cfg.resolve_or(args.side, "side", 50)?;
    let snr = cfg.resolve_or(args.snr, "snr", 0.1)?;
    let seed = cfg.resolve_or(args.seed, "seed", 0)?;
    let out = require(cfg.resolve_path(args.out, "out"), "out")?;

    for d in 0..count {
        let ds = generate_dataset::<f64>(seed.wrapping_add(d as u64), n, side, snr)?;
        write_dataset(&out.join(format!("dataset_{d:03}")), &ds)?;
    }
    println!(
        "wrote {count} dataset(s) to {} (n={n}, side={side}, snr={snr}, seed={seed})",
        out.display()
    );
    Ok(())
}
