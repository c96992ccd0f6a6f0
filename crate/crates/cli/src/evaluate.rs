//! The evaluate command: fits SPCA-TV and its ElasticNet-PCA baseline across
//! datasets or cross-validation folds and writes a comparison report.
//!
//! Weights are either given explicitly or tuned per method on the first
//! dataset's train/test split: the candidate minimizing test reconstruction
//! error wins, subject to at least half the features of the second and third
//! components being exactly zero.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use spcatv::io::{read_model, write_report_csv, ReportRow};
use spcatv::metrics::{
    dice_index, loading_mse, match_components, reconstruction_error, stability_dice,
};
use spcatv::{Error, Model, Operator, Result, Weights};

use crate::config::{parse_list, require, FileConfig};
use crate::data::{self, Dataset};
use crate::pool::run_indexed;
use crate::{structure, EvaluateArgs};

const DEFAULT_GLOBAL_WEIGHTS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const DEFAULT_RATIOS: [f64; 5] = [0.0, 0.1, 0.33, 0.5, 0.8];

/// Everything shared by the fitting jobs.
struct EvalContext {
    k: usize,
    eps: f64,
    seed: u64,
    workers: usize,
}

struct MethodDef {
    name: &'static str,
    tv_active: bool,
}

const METHODS: [MethodDef; 2] = [
    MethodDef {
        name: "spca-tv",
        tv_active: true,
    },
    MethodDef {
        name: "en-pca",
        tv_active: false,
    },
];

pub fn run(args: EvaluateArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let data_path = require(cfg.resolve_path(args.data, "data"), "data")?;
    let out = require(cfg.resolve_path(args.out, "out"), "out")?;
    let ctx = EvalContext {
        k: cfg.resolve_or(args.k, "k", 3)?,
        eps: cfg.resolve_or(args.eps, "eps", 1e-4)?,
        seed: cfg.resolve_or(args.seed, "seed", 0)?,
        workers: cfg.resolve_or(args.workers, "workers", 1)?,
    };
    if ctx.workers == 0 {
        return Err(Error::InvalidParameter(
            "--workers must be at least 1".into(),
        ));
    }
    let folds = cfg.resolve(args.folds, "folds")?;
    let global_weight = cfg.resolve(args.global_weight, "global-weight")?;
    let l1_ratio = cfg.resolve_or(args.l1_ratio, "l1-ratio", 0.0)?;
    let tv_ratio = cfg.resolve_or(args.tv_ratio, "tv-ratio", 0.0)?;

    // Pre-fitted single-model mode: score the model on the data and stop.
    if let Some(model_dir) = cfg.resolve_path(args.model, "model") {
        let dataset = data::load_single(&data_path)?;
        let model = read_model(&model_dir)?;
        return single_model_report(&out, &dataset, &model);
    }

    let paths = data::discover(&data_path)?;
    let datasets: Vec<Dataset> = paths
        .iter()
        .map(|p| data::load_single(p))
        .collect::<Result<_>>()?;
    let structure = structure::resolve(&args.structure, &cfg, datasets[0].side)?;
    for ds in &datasets {
        if ds.x.ncols() != structure.p() {
            return Err(Error::DimensionMismatch {
                expected: structure.p(),
                actual: ds.x.ncols(),
            });
        }
    }
    let op = structure.operator()?;

    let explicit = global_weight.map(|w| (w, l1_ratio, tv_ratio));
    let grid = TuningGrid {
        global_weights: match cfg.resolve(args.tune_global_weights, "tune-global-weights")? {
            Some(raw) => parse_list(&raw, "--tune-global-weights")?,
            None => DEFAULT_GLOBAL_WEIGHTS.to_vec(),
        },
        l1_ratios: match cfg.resolve(args.tune_l1_ratios, "tune-l1-ratios")? {
            Some(raw) => parse_list(&raw, "--tune-l1-ratios")?,
            None => DEFAULT_RATIOS.to_vec(),
        },
        tv_ratios: match cfg.resolve(args.tune_tv_ratios, "tune-tv-ratios")? {
            Some(raw) => parse_list(&raw, "--tune-tv-ratios")?,
            None => DEFAULT_RATIOS.to_vec(),
        },
    };

    let rows = match folds {
        Some(f) => {
            if f < 2 {
                return Err(Error::InvalidParameter("--folds must be at least 2".into()));
            }
            if datasets.len() != 1 {
                return Err(Error::InvalidParameter(
                    "--folds needs a single dataset, not a dataset collection".into(),
                ));
            }
            let (w, l1, tv) = explicit.ok_or_else(|| {
                Error::InvalidParameter(
                    "fold evaluation needs explicit --global-weight/--l1-ratio/--tv-ratio".into(),
                )
            })?;
            eval_folds(&ctx, &op, &datasets[0], f, w, l1, tv)?
        }
        None => eval_datasets(&ctx, &op, &datasets, explicit, &grid)?,
    };

    std::fs::create_dir_all(&out)?;
    let report = out.join("report.csv");
    write_report_csv(&report, &rows)?;
    println!("wrote {} row(s) to {}", rows.len(), report.display());
    Ok(())
}

fn single_model_report(out: &Path, dataset: &Dataset, model: &Model) -> Result<()> {
    let recon = reconstruction_error(dataset.x.view(), model)?;
    let (mse, dice) = truth_metrics(model.loadings(), dataset.v_true.as_ref())?;
    if mse.is_none() {
        eprintln!("warning: no ground-truth loadings; MSE column left empty");
    }
    let rows = vec![ReportRow {
        method: "model".into(),
        dataset: dataset.name.clone(),
        reconstruction_error: recon,
        mse,
        dice,
    }];
    std::fs::create_dir_all(out)?;
    let report = out.join("report.csv");
    write_report_csv(&report, &rows)?;
    println!("wrote 1 row to {}", report.display());
    Ok(())
}

/// MSE and Dice against ground truth when it is available. The Dice is the
/// mean over reference components of the matched support overlap; reference
/// components with no matched estimate count as zero.
fn truth_metrics(
    loadings: ArrayView2<'_, f64>,
    v_true: Option<&Array2<f64>>,
) -> Result<(Option<f64>, Option<f64>)> {
    let Some(v_true) = v_true else {
        return Ok((None, None));
    };
    let mse = loading_mse(loadings, v_true.view())?;
    let matching = match_components(loadings, v_true.view())?;
    let mut total = 0.0;
    for &(est, reference) in matching.pairs() {
        total += dice_index(loadings.column(est), v_true.column(reference))?;
    }
    let dice = total / v_true.ncols() as f64;
    Ok((Some(mse), Some(dice)))
}

struct TuningGrid {
    global_weights: Vec<f64>,
    l1_ratios: Vec<f64>,
    tv_ratios: Vec<f64>,
}

impl TuningGrid {
    /// Enumerates valid candidates in deterministic grid order. The TV method
    /// requires tv_ratio > 0, the baseline pins it to 0; combinations leaving
    /// no ridge share (l1 + tv >= 1) are structurally invalid and skipped.
    fn candidates(&self, tv_active: bool) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &w in &self.global_weights {
            for &l1 in &self.l1_ratios {
                if tv_active {
                    for &tv in &self.tv_ratios {
                        if tv > 0.0 && l1 + tv < 1.0 {
                            out.push((w, l1, tv));
                        }
                    }
                } else if l1 < 1.0 {
                    out.push((w, l1, 0.0));
                }
            }
        }
        out
    }
}

/// One fitted evaluation unit (a dataset or a fold).
struct Outcome {
    label: String,
    recon: f64,
    mse: Option<f64>,
    dice: Option<f64>,
    loadings: Array2<f64>,
}

fn eval_datasets(
    ctx: &EvalContext,
    op: &Operator,
    datasets: &[Dataset],
    explicit: Option<(f64, f64, f64)>,
    grid: &TuningGrid,
) -> Result<Vec<ReportRow>> {
    let mut all_rows = Vec::new();
    let mut means = Vec::new();
    for method in &METHODS {
        let (w, l1, tv) = match explicit {
            Some((w, l1, tv)) => {
                if method.tv_active {
                    (w, l1, tv)
                } else {
                    (w, l1, 0.0)
                }
            }
            None => tune(ctx, op, &datasets[0], grid, method)?,
        };
        let weights = Weights::from_ratios(w, l1, tv)?;
        eprintln!(
            "{}: using global_weight={w} l1_ratio={l1} tv_ratio={tv}",
            method.name
        );

        let outcomes: Vec<Result<Outcome>> = run_indexed(datasets.len(), ctx.workers, |i| {
            let ds = &datasets[i];
            let (train, test) = split_half(ds.x.view());
            let model = Model::fit(train, op, ctx.k, weights.clone(), ctx.eps, ctx.seed)?;
            let recon = reconstruction_error(test, &model)?;
            let (mse, dice) = truth_metrics(model.loadings(), ds.v_true.as_ref())?;
            Ok(Outcome {
                label: ds.name.clone(),
                recon,
                mse,
                dice,
                loadings: model.loadings().to_owned(),
            })
        });
        let outcomes: Vec<Outcome> = outcomes.into_iter().collect::<Result<_>>()?;
        let (rows, mean) = summarize(method.name, outcomes)?;
        all_rows.extend(rows);
        means.push(mean);
    }
    all_rows.push(difference_row(&means[0], &means[1]));
    Ok(all_rows)
}

fn eval_folds(
    ctx: &EvalContext,
    op: &Operator,
    dataset: &Dataset,
    folds: usize,
    w: f64,
    l1: f64,
    tv: f64,
) -> Result<Vec<ReportRow>> {
    let n = dataset.x.nrows();
    if n < folds {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds need at least {folds} samples, got {n}"
        )));
    }
    let mut all_rows = Vec::new();
    let mut means = Vec::new();
    for method in &METHODS {
        let tv = if method.tv_active { tv } else { 0.0 };
        let weights = Weights::from_ratios(w, l1, tv)?;
        let outcomes: Vec<Result<Outcome>> = run_indexed(folds, ctx.workers, |f| {
            let (train, test) = fold_split(dataset.x.view(), folds, f);
            let model = Model::fit(train.view(), op, ctx.k, weights.clone(), ctx.eps, ctx.seed)?;
            let recon = reconstruction_error(test.view(), &model)?;
            let (mse, dice) = truth_metrics(model.loadings(), dataset.v_true.as_ref())?;
            Ok(Outcome {
                label: format!("fold_{f}"),
                recon,
                mse,
                dice,
                loadings: model.loadings().to_owned(),
            })
        });
        let outcomes: Vec<Outcome> = outcomes.into_iter().collect::<Result<_>>()?;
        let (rows, mean) = summarize(method.name, outcomes)?;
        all_rows.extend(rows);
        means.push(mean);
    }
    all_rows.push(difference_row(&means[0], &means[1]));
    Ok(all_rows)
}

/// First half of the rows train, second half test (matches the generator's
/// own split).
fn split_half(x: ArrayView2<'_, f64>) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
    x.split_at(Axis(0), x.nrows() / 2)
}

/// Contiguous-block cross-validation split: fold f tests on rows
/// [f*n/folds, (f+1)*n/folds) and trains on the rest.
fn fold_split(x: ArrayView2<'_, f64>, folds: usize, f: usize) -> (Array2<f64>, Array2<f64>) {
    let n = x.nrows();
    let start = f * n / folds;
    let end = (f + 1) * n / folds;
    let train_idx: Vec<usize> = (0..n).filter(|r| *r < start || *r >= end).collect();
    let test_idx: Vec<usize> = (start..end).collect();
    (x.select(Axis(0), &train_idx), x.select(Axis(0), &test_idx))
}

/// Grid search on the first dataset per the evaluation protocol: fit each
/// candidate on the train half, require at least half exact zeros in the
/// second and third components, and keep the lowest test reconstruction
/// error. Candidates that fail to converge or collapse are skipped; if none
/// survive the sparsity screen the best-scoring survivor wins with a warning.
fn tune(
    ctx: &EvalContext,
    op: &Operator,
    dataset: &Dataset,
    grid: &TuningGrid,
    method: &MethodDef,
) -> Result<(f64, f64, f64)> {
    let candidates = grid.candidates(method.tv_active);
    if candidates.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{}: tuning grid has no valid candidates",
            method.name
        )));
    }
    let (train, test) = split_half(dataset.x.view());

    enum Scored {
        Eligible(f64),
        Ineligible(f64),
        Failed,
    }
    let scores: Vec<Scored> = run_indexed(candidates.len(), ctx.workers, |i| {
        let (w, l1, tv) = candidates[i];
        let Ok(weights) = Weights::from_ratios(w, l1, tv) else {
            return Scored::Failed;
        };
        let model = match Model::fit(train, op, ctx.k, weights, ctx.eps, ctx.seed) {
            Ok(m) => m,
            Err(_) => return Scored::Failed,
        };
        let Ok(recon) = reconstruction_error(test, &model) else {
            return Scored::Failed;
        };
        if model.truncated() || !sparsity_screen(&model) {
            return Scored::Ineligible(recon);
        }
        Scored::Eligible(recon)
    });

    let pick = |eligible_only: bool| {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.iter().enumerate() {
            let recon = match s {
                Scored::Eligible(r) => *r,
                Scored::Ineligible(r) if !eligible_only => *r,
                _ => continue,
            };
            if best.map_or(true, |(_, b)| recon < b) {
                best = Some((i, recon));
            }
        }
        best.map(|(i, _)| candidates[i])
    };

    if let Some(choice) = pick(true) {
        return Ok(choice);
    }
    if let Some(choice) = pick(false) {
        eprintln!(
            "warning: {}: no candidate met the sparsity constraint; using best reconstruction",
            method.name
        );
        return Ok(choice);
    }
    Err(Error::NonConvergence {
        stage: "hyperparameter tuning",
        limit: candidates.len(),
        trace: None,
    })
}

/// At least half of the features of the second and third components must be
/// exactly zero.
fn sparsity_screen(model: &Model) -> bool {
    let p = model.p();
    (1..model.k().min(3)).all(|comp| {
        let zeros = model
            .loadings()
            .column(comp)
            .iter()
            .filter(|x| **x == 0.0)
            .count();
        zeros * 2 >= p
    })
}

/// Mean values carried into the difference row.
struct MethodMean {
    name: &'static str,
    recon: f64,
    mse: Option<f64>,
    dice: Option<f64>,
}

/// Per-unit rows plus a mean row. The mean row's Dice column holds the
/// pairwise stability Dice across units rather than the per-unit mean, since
/// stability is only defined across resamples.
fn summarize(name: &'static str, outcomes: Vec<Outcome>) -> Result<(Vec<ReportRow>, MethodMean)> {
    if outcomes.iter().any(|o| o.mse.is_none()) {
        eprintln!("warning: {name}: no ground-truth loadings; MSE column left empty");
    }
    let mut rows: Vec<ReportRow> = outcomes
        .iter()
        .map(|o| ReportRow {
            method: name.into(),
            dataset: o.label.clone(),
            reconstruction_error: o.recon,
            mse: o.mse,
            dice: o.dice,
        })
        .collect();

    let count = outcomes.len() as f64;
    let recon = outcomes.iter().map(|o| o.recon).sum::<f64>() / count;
    let mse = outcomes
        .iter()
        .map(|o| o.mse)
        .sum::<Option<f64>>()
        .map(|total| total / count);
    let stability = if outcomes.len() >= 2 {
        let frames: Vec<Array2<f64>> = outcomes.into_iter().map(|o| o.loadings).collect();
        Some(stability_dice(&frames)?.overall)
    } else {
        None
    };
    rows.push(ReportRow {
        method: name.into(),
        dataset: "mean".into(),
        reconstruction_error: recon,
        mse,
        dice: stability,
    });
    Ok((
        rows,
        MethodMean {
            name,
            recon,
            mse,
            dice: stability,
        },
    ))
}

/// Paired difference of the two method means, first minus second.
fn difference_row(a: &MethodMean, b: &MethodMean) -> ReportRow {
    ReportRow {
        method: "difference".into(),
        dataset: format!("{} minus {}", a.name, b.name),
        reconstruction_error: a.recon - b.recon,
        mse: a.mse.zip(b.mse).map(|(x, y)| x - y),
        dice: a.dice.zip(b.dice).map(|(x, y)| x - y),
    }
}
