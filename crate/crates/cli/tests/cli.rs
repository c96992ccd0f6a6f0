//! End-to-end tests of the spcatv binary: command wiring, file outputs, and
//! the documented exit codes (0 success, 1 usage, 2 data, 3 convergence).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_spcatv")
}

fn scratch(tag: &str) -> PathBuf {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let id = COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("spcatv-cli-{}-{id}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let output = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: output.status.code().expect("no signal"),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn simulate_small(out: &Path, count: usize) {
    let r = run(&[
        "simulate",
        "--count",
        &count.to_string(),
        "--n",
        "20",
        "--side",
        "16",
        "--snr",
        "1.0",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "simulate failed: {}", r.stderr);
}

#[test]
fn simulate_fit_export_pipeline_succeeds() {
    let dir = scratch("pipeline");
    let sims = dir.join("sims");
    simulate_small(&sims, 2);
    for d in ["dataset_000", "dataset_001"] {
        for f in ["X.csv", "U_true.csv", "V_true.csv", "meta.json"] {
            assert!(sims.join(d).join(f).is_file(), "{d}/{f} missing");
        }
    }

    let model = dir.join("model");
    let r = run(&[
        "fit",
        "--data",
        sims.join("dataset_000").to_str().unwrap(),
        "--k",
        "2",
        "--eps",
        "1e-3",
        "--seed",
        "1",
        "--global-weight",
        "0.05",
        "--l1-ratio",
        "0.33",
        "--tv-ratio",
        "0.33",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "fit failed: {}", r.stderr);
    assert!(r.stdout.contains("fitted 2 component(s)"), "{}", r.stdout);
    for f in [
        "U.csv",
        "V.csv",
        "means.csv",
        "meta.json",
        "trace_0.csv",
        "trace_1.csv",
    ] {
        assert!(model.join(f).is_file(), "{f} missing");
    }

    let maps = dir.join("maps");
    let r = run(&[
        "export-maps",
        "--model",
        model.to_str().unwrap(),
        "--out",
        maps.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "export failed: {}", r.stderr);
    let pgm = std::fs::read_to_string(maps.join("component_0.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n16 16\n255\n"), "bad header: {pgm}");
    let pixels: Vec<u32> = pgm
        .lines()
        .skip(3)
        .flat_map(|l| l.split_whitespace())
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(pixels.len(), 256);
    assert!(pixels.iter().all(|&v| (1..=255).contains(&v)));
    assert!(maps.join("component_1.pgm").is_file());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn evaluate_on_datasets_reports_both_methods() {
    let dir = scratch("evaluate");
    let sims = dir.join("sims");
    simulate_small(&sims, 2);
    let out = dir.join("report");
    let r = run(&[
        "evaluate",
        "--data",
        sims.to_str().unwrap(),
        "--k",
        "2",
        "--eps",
        "1e-3",
        "--seed",
        "1",
        "--global-weight",
        "0.05",
        "--l1-ratio",
        "0.33",
        "--tv-ratio",
        "0.33",
        "--workers",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "evaluate failed: {}", r.stderr);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "method,dataset,reconstruction_error,mse,dice");
    // 2 datasets + mean, per method, plus one difference row.
    assert_eq!(lines.len(), 1 + 3 + 3 + 1, "{report}");
    assert!(lines.iter().any(|l| l.starts_with("spca-tv,dataset_000,")));
    assert!(lines.iter().any(|l| l.starts_with("en-pca,mean,")));
    assert!(lines
        .iter()
        .any(|l| l.starts_with("difference,spca-tv minus en-pca,")));
    // Ground truth is present, so MSE and Dice cells are filled.
    let data_row = lines
        .iter()
        .find(|l| l.starts_with("spca-tv,dataset_000,"))
        .unwrap();
    assert_eq!(data_row.split(',').count(), 5);
    assert!(
        data_row.split(',').all(|cell| !cell.is_empty()),
        "{data_row}"
    );

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn identical_fold_blocks_give_stability_dice_one() {
    let dir = scratch("folds");
    // Five identical two-row blocks: every training set is the same ordered
    // matrix, so the five fitted models coincide and stability Dice is 1.
    let mut csv = String::new();
    for _ in 0..5 {
        for r in 0..2 {
            let row: Vec<String> = (0..16)
                .map(|j| (((r + 1) * (j + 3)) % 7) as f64 - 3.0)
                .map(|v| v.to_string())
                .collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
    }
    let data = dir.join("x.csv");
    std::fs::write(&data, csv).unwrap();

    let out = dir.join("report");
    let r = run(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--grid",
        "4x4",
        "--folds",
        "5",
        "--k",
        "1",
        "--eps",
        "1e-4",
        "--seed",
        "3",
        "--global-weight",
        "0.01",
        "--l1-ratio",
        "0.1",
        "--tv-ratio",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "evaluate failed: {}", r.stderr);
    assert!(
        r.stderr.contains("MSE column left empty"),
        "missing warning: {}",
        r.stderr
    );
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mean_row = report
        .lines()
        .find(|l| l.starts_with("spca-tv,mean,"))
        .expect("mean row");
    let cells: Vec<&str> = mean_row.split(',').collect();
    assert_eq!(cells[3], "", "MSE must be empty without ground truth");
    assert_eq!(
        cells[4], "1",
        "stability dice should be exactly 1: {mean_row}"
    );

    let fold_recons: Vec<&str> = report
        .lines()
        .filter(|l| l.starts_with("spca-tv,fold_"))
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(fold_recons.len(), 5);
    assert!(
        fold_recons.iter().all(|r| *r == fold_recons[0]),
        "identical folds must give identical errors: {fold_recons:?}"
    );

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn evaluate_scores_a_prefitted_model() {
    let dir = scratch("model-mode");
    let sims = dir.join("sims");
    simulate_small(&sims, 1);
    let model = dir.join("model");
    let r = run(&[
        "fit",
        "--data",
        sims.join("dataset_000").to_str().unwrap(),
        "--k",
        "1",
        "--eps",
        "1e-3",
        "--global-weight",
        "0.05",
        "--l1-ratio",
        "0.33",
        "--tv-ratio",
        "0.33",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "fit failed: {}", r.stderr);

    let out = dir.join("report");
    let r = run(&[
        "evaluate",
        "--data",
        sims.join("dataset_000").to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "evaluate failed: {}", r.stderr);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2, "{report}");
    assert!(report
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("model,dataset_000,"));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = scratch("config");
    let sims = dir.join("sims");
    simulate_small(&sims, 1);
    let cfg = dir.join("run.cfg");
    let model = dir.join("model");
    std::fs::write(
        &cfg,
        format!(
            "# fit defaults\ndata={}\nk=2\neps=1e-3\nglobal-weight=0.05\nl1-ratio=0.33\ntv-ratio=0.33\nout={}\n",
            sims.join("dataset_000").display(),
            model.display()
        ),
    )
    .unwrap();
    let r = run(&["fit", "--config", cfg.to_str().unwrap(), "--k", "1"]);
    assert_eq!(r.code, 0, "fit failed: {}", r.stderr);
    let meta = std::fs::read_to_string(model.join("meta.json")).unwrap();
    assert!(meta.contains("\"k\": 1"), "flag must override file: {meta}");

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_errors_exit_one() {
    // Unknown flag.
    let r = run(&["fit", "--bogus"]);
    assert_eq!(r.code, 1);
    // Missing required value.
    let r = run(&["simulate", "--n", "10"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("--out"), "{}", r.stderr);
    // Invalid domain parameter.
    let dir = scratch("snr");
    let r = run(&[
        "simulate",
        "--snr",
        "0",
        "--out",
        dir.join("x").to_str().unwrap(),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("snr must be positive"), "{}", r.stderr);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["--version"]).code, 0);
    assert_eq!(run(&["fit", "--help"]).code, 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = scratch("data-errors");
    // Nonexistent data path.
    let r = run(&[
        "fit",
        "--data",
        dir.join("missing.csv").to_str().unwrap(),
        "--grid",
        "4x4",
        "--global-weight",
        "0.1",
        "--out",
        dir.join("m").to_str().unwrap(),
    ]);
    assert_eq!(r.code, 2, "{}", r.stderr);

    // Structure disagrees with the data width.
    let data = dir.join("x.csv");
    std::fs::write(&data, "1,2,3,4\n5,6,7,8\n1,0,1,0\n2,2,1,1\n").unwrap();
    let r = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--grid",
        "3x3",
        "--global-weight",
        "0.1",
        "--out",
        dir.join("m").to_str().unwrap(),
    ]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("dimension mismatch"), "{}", r.stderr);

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unattainable_precision_exits_three() {
    let dir = scratch("noconv");
    let data = dir.join("x.csv");
    let mut csv = String::new();
    for r in 0..6 {
        let row: Vec<String> = (0..16)
            .map(|j| ((r * j) as f64 * 0.37 + ((r + j) % 3) as f64).to_string())
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(&data, csv).unwrap();
    let r = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--grid",
        "4x4",
        "--k",
        "1",
        "--eps",
        "1e-300",
        "--global-weight",
        "0.05",
        "--l1-ratio",
        "0.2",
        "--tv-ratio",
        "0.4",
        "--out",
        dir.join("m").to_str().unwrap(),
    ]);
    assert_eq!(r.code, 3, "stdout: {} stderr: {}", r.stdout, r.stderr);
    assert!(r.stderr.contains("no convergence"), "{}", r.stderr);

    std::fs::remove_dir_all(&dir).ok();
}
