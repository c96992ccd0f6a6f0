//! Command-line surface: dataset generation, model fitting, evaluation
//! reports, and loading-map export.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence failure.

mod config;
mod data;
mod evaluate;
mod export;
mod fit;
mod pool;
mod simulate;
mod structure;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use spcatv::Error;

#[derive(Parser)]
#[command(
    name = "spcatv",
    version,
    about = "Sparse principal component analysis with l1 and total-variation penalties"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic benchmark datasets
    Simulate(SimulateArgs),
    /// Fit a model on one dataset and write a model directory
    Fit(FitArgs),
    /// Compare methods across datasets or cross-validation folds
    Evaluate(EvaluateArgs),
    /// Render fitted loadings as PGM images (grid) or per-vertex CSVs (mesh)
    ExportMaps(ExportMapsArgs),
}

/// Structure selection shared by fit, evaluate, and export-maps. Exactly one
/// of mask, mesh, or grid may be given; datasets with square images fall back
/// to their own full grid.
#[derive(Args, Clone, Default)]
struct StructureArgs {
    /// Voxel mask file (GRID format)
    #[arg(long, value_name = "PATH")]
    mask: Option<PathBuf>,
    /// Triangle mesh file (MESH format)
    #[arg(long, value_name = "PATH")]
    mesh: Option<PathBuf>,
    /// Full-grid image dimensions
    #[arg(long, value_name = "WxH")]
    grid: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat key=value config file; flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Number of datasets to generate
    #[arg(long)]
    count: Option<usize>,
    /// Samples per dataset
    #[arg(long)]
    n: Option<usize>,
    /// Image side length (features = side x side)
    #[arg(long)]
    side: Option<usize>,
    /// Signal-to-noise ratio (Frobenius); inf for noiseless
    #[arg(long)]
    snr: Option<f64>,
    /// Base RNG seed; dataset d uses seed + d
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Flat key=value config file; flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dataset directory or headerless CSV matrix (one sample per row)
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    #[command(flatten)]
    structure: StructureArgs,
    /// Number of components
    #[arg(long)]
    k: Option<usize>,
    /// Duality-gap precision passed to the solver
    #[arg(long)]
    eps: Option<f64>,
    /// RNG seed for component initialization
    #[arg(long)]
    seed: Option<u64>,
    /// Global penalty weight; individual weights are weight * ratio
    #[arg(long)]
    global_weight: Option<f64>,
    /// l1 share of the global weight, in [0, 1]
    #[arg(long)]
    l1_ratio: Option<f64>,
    /// TV share of the global weight, in [0, 1]
    #[arg(long)]
    tv_ratio: Option<f64>,
    /// Output model directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Flat key=value config file; flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dataset directory, directory of dataset_* subdirectories, or CSV
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Evaluate one fitted model directory instead of refitting
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[command(flatten)]
    structure: StructureArgs,
    /// Number of components
    #[arg(long)]
    k: Option<usize>,
    /// Duality-gap precision passed to the solver
    #[arg(long)]
    eps: Option<f64>,
    /// RNG seed shared by every fit
    #[arg(long)]
    seed: Option<u64>,
    /// Cross-validate with this many folds on a single dataset
    #[arg(long)]
    folds: Option<usize>,
    /// Worker threads for fold/dataset-level parallelism
    #[arg(long)]
    workers: Option<usize>,
    /// Global penalty weight; omit to tune over the grid
    #[arg(long)]
    global_weight: Option<f64>,
    /// l1 share of the global weight, in [0, 1]
    #[arg(long)]
    l1_ratio: Option<f64>,
    /// TV share of the global weight, in [0, 1]
    #[arg(long)]
    tv_ratio: Option<f64>,
    /// Comma-separated global weights for the tuning grid
    #[arg(long, value_name = "LIST")]
    tune_global_weights: Option<String>,
    /// Comma-separated l1 ratios for the tuning grid
    #[arg(long, value_name = "LIST")]
    tune_l1_ratios: Option<String>,
    /// Comma-separated TV ratios for the tuning grid
    #[arg(long, value_name = "LIST")]
    tune_tv_ratios: Option<String>,
    /// Output directory for report.csv
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportMapsArgs {
    /// Flat key=value config file; flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Fitted model directory
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[command(flatten)]
    structure: StructureArgs,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Cmd::Simulate(args) => simulate::run(args),
        Cmd::Fit(args) => fit::run(args),
        Cmd::Evaluate(args) => evaluate::run(args),
        Cmd::ExportMaps(args) => export::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Usage errors exit 1, data errors 2, numeric failures 3.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) => 1,
        Error::Io(_)
        | Error::Json(_)
        | Error::Parse(_)
        | Error::DimensionMismatch { .. }
        | Error::EmptyMask
        | Error::InvalidMesh(_) => 2,
        Error::Divergence | Error::NonConvergence { .. } | Error::DegenerateLoading => 3,
    }
}
