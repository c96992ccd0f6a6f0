//! File formats: plain-text masks and meshes, headerless CSV matrices, model
//! and dataset directories with JSON metadata, solver-trace and report CSVs,
//! and P2 portable-graymap loading images. All numeric text uses the shortest
//! round-trip form, so identical values always produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{PenaltyWeights, SolverTrace, TraceRecord};
use crate::spca::SpcaModel;
use crate::structure::{GridMask, GroupLinearOperator, TriangleMesh};
use crate::synthdata::SyntheticDataset;

fn parse_err(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {what}", path.display()))
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            write!(out, "{v}").expect("string write");
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a headerless CSV matrix; all rows must have equal length.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 1)))?;
            data.push(v);
            count += 1;
        }
        match ncols {
            None => ncols = Some(count),
            Some(c) if c != count => {
                return Err(parse_err(
                    path,
                    format!("line {}: expected {c} columns, got {count}", lineno + 1),
                ));
            }
            _ => {}
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    Array2::from_shape_vec((nrows, ncols), data).map_err(|e| parse_err(path, format!("shape: {e}")))
}

/// Writes a vector as a single-column CSV.
pub fn write_vector_csv(path: &Path, v: ArrayView1<'_, f64>) -> Result<()> {
    let mut out = String::new();
    for x in v {
        writeln!(out, "{x}").expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a single-column CSV vector.
pub fn read_vector_csv(path: &Path) -> Result<Array1<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() > 1 {
        return Err(parse_err(
            path,
            format!("expected 1 column, got {}", m.ncols()),
        ));
    }
    let len = m.nrows() * m.ncols();
    Ok(m.into_shape_with_order(len).expect("column reshape"))
}

/// Writes a voxel mask as text: a `GRID ni nj nk` header, then one line of
/// ni space-separated 0/1 flags per (j, k) scanline.
pub fn write_mask(path: &Path, mask: &GridMask) -> Result<()> {
    let (ni, nj, nk) = mask.dims();
    let mut out = format!("GRID {ni} {nj} {nk}\n");
    for k in 0..nk {
        for j in 0..nj {
            for i in 0..ni {
                if i > 0 {
                    out.push(' ');
                }
                out.push(if mask.is_inside(i, j, k) { '1' } else { '0' });
            }
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `GRID ni nj nk` mask file.
pub fn read_mask(path: &Path) -> Result<GridMask> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    match tokens.next() {
        Some("GRID") => {}
        other => {
            return Err(parse_err(
                path,
                format!("expected GRID header, got {other:?}"),
            ))
        }
    }
    let mut dim = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| parse_err(path, format!("missing dimension {name}")))?
            .parse()
            .map_err(|e| parse_err(path, format!("dimension {name}: {e}")))
    };
    let ni = dim("ni")?;
    let nj = dim("nj")?;
    let nk = dim("nk")?;
    let flags: Vec<bool> = tokens
        .map(|t| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(parse_err(path, format!("flag must be 0 or 1, got {other}"))),
        })
        .collect::<Result<_>>()?;
    GridMask::from_flags((ni, nj, nk), flags)
}

/// Writes a triangle mesh as text: a `MESH nv nt` header, nv vertex lines
/// `x y z`, then nt triangle lines `a b c`.
pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut out = format!(
        "MESH {} {}\n",
        mesh.vertices().len(),
        mesh.triangles().len()
    );
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v[0], v[1], v[2]).expect("string write");
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2]).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `MESH nv nt` mesh file.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    match tokens.next() {
        Some("MESH") => {}
        other => {
            return Err(parse_err(
                path,
                format!("expected MESH header, got {other:?}"),
            ))
        }
    }
    let mut count = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| parse_err(path, format!("missing count {name}")))?
            .parse()
            .map_err(|e| parse_err(path, format!("count {name}: {e}")))
    };
    let nv = count("nv")?;
    let nt = count("nt")?;
    let mut vertices = Vec::with_capacity(nv);
    for v in 0..nv {
        let mut coord = [0.0f64; 3];
        for c in &mut coord {
            *c = tokens
                .next()
                .ok_or_else(|| parse_err(path, format!("vertex {v}: missing coordinate")))?
                .parse()
                .map_err(|e| parse_err(path, format!("vertex {v}: {e}")))?;
        }
        vertices.push(coord);
    }
    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let mut idx = [0usize; 3];
        for c in &mut idx {
            *c = tokens
                .next()
                .ok_or_else(|| parse_err(path, format!("triangle {t}: missing index")))?
                .parse()
                .map_err(|e| parse_err(path, format!("triangle {t}: {e}")))?;
        }
        triangles.push(idx);
    }
    TriangleMesh::new(vertices, triangles)
}

/// Sidecar metadata of a dataset directory. A missing `snr` means the noise
/// was scaled to zero (infinite ratio).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub p: usize,
    pub side: usize,
    pub snr: Option<f64>,
    pub seed: u64,
    pub structure: String,
}

/// Writes X.csv, U_true.csv, V_true.csv and meta.json into `dir`.
pub fn write_dataset(dir: &Path, ds: &SyntheticDataset<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("X.csv"), ds.x.view())?;
    write_matrix_csv(&dir.join("U_true.csv"), ds.u_true.view())?;
    write_matrix_csv(&dir.join("V_true.csv"), ds.v_true.view())?;
    let meta = DatasetMeta {
        n: ds.n(),
        p: ds.p(),
        side: ds.side,
        snr: if ds.snr.is_finite() {
            Some(ds.snr)
        } else {
            None
        },
        seed: ds.seed,
        structure: "grid".into(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Reads a dataset directory back. Ground-truth matrices are optional.
pub fn read_dataset(dir: &Path) -> Result<(Array2<f64>, Option<Array2<f64>>, DatasetMeta)> {
    let x = read_matrix_csv(&dir.join("X.csv"))?;
    let v_path = dir.join("V_true.csv");
    let v_true = if v_path.exists() {
        Some(read_matrix_csv(&v_path)?)
    } else {
        None
    };
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    if meta.n != x.nrows() || meta.p != x.ncols() {
        return Err(parse_err(
            dir.join("meta.json").as_path(),
            format!(
                "metadata says {}×{}, X.csv is {}×{}",
                meta.n,
                meta.p,
                x.nrows(),
                x.ncols()
            ),
        ));
    }
    Ok((x, v_true, meta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelMeta {
    k: usize,
    n: usize,
    p: usize,
    l1: f64,
    l2: f64,
    tv: f64,
    eps: f64,
    seed: u64,
    explained_variance: Vec<f64>,
    truncated: bool,
}

/// Writes a fitted model as a directory: U.csv, V.csv, means.csv, meta.json,
/// and one trace_<k>.csv per component.
pub fn write_model(dir: &Path, model: &SpcaModel<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("U.csv"), model.components())?;
    write_matrix_csv(&dir.join("V.csv"), model.loadings())?;
    write_vector_csv(&dir.join("means.csv"), model.means())?;
    let meta = ModelMeta {
        k: model.k(),
        n: model.components().nrows(),
        p: model.p(),
        l1: model.weights().l1(),
        l2: model.weights().l2(),
        tv: model.weights().tv(),
        eps: model.eps(),
        seed: model.seed(),
        explained_variance: model.explained_variance().to_vec(),
        truncated: model.truncated(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    for (k, trace) in model.traces().iter().enumerate() {
        write_trace_csv(&dir.join(format!("trace_{k}.csv")), trace)?;
    }
    Ok(())
}

/// Reads a model directory written by [`write_model`]. Traces are restored
/// when present.
pub fn read_model(dir: &Path) -> Result<SpcaModel<f64>> {
    let mut u = read_matrix_csv(&dir.join("U.csv"))?;
    let mut v = read_matrix_csv(&dir.join("V.csv"))?;
    let means = read_vector_csv(&dir.join("means.csv"))?;
    let meta: ModelMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    // A zero-component model serializes as empty CSVs; restore the shapes.
    if meta.k == 0 {
        u = Array2::zeros((meta.n, 0));
        v = Array2::zeros((meta.p, 0));
    }
    let weights = PenaltyWeights::new(meta.l1, meta.l2, meta.tv)?;
    let mut traces = Vec::with_capacity(meta.k);
    for k in 0..meta.k {
        let path = dir.join(format!("trace_{k}.csv"));
        if path.exists() {
            traces.push(read_trace_csv(&path)?);
        }
    }
    Ok(SpcaModel::from_parts(
        means,
        u,
        v,
        meta.explained_variance,
        traces,
        weights,
        meta.eps,
        meta.seed,
        meta.truncated,
    ))
}

const TRACE_HEADER: &str = "continuation,mu,eps,eps_mu,fista_iters,gap,objective";

/// Writes a solver trace as CSV. The `eps` column holds the certified
/// precision of each continuation.
pub fn write_trace_csv(path: &Path, trace: &SolverTrace) -> Result<()> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace.records() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.continuation, r.mu, r.eps_certified, r.eps_mu, r.fista_iters, r.gap, r.objective
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a trace CSV written by [`write_trace_csv`]. The prescribed targets
/// are not stored in the file; they are restored as NaN.
pub fn read_trace_csv(path: &Path) -> Result<SolverTrace> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(TRACE_HEADER) => {}
        other => return Err(parse_err(path, format!("bad trace header {other:?}"))),
    }
    let mut trace = SolverTrace::default();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(
                path,
                format!(
                    "line {}: expected 7 fields, got {}",
                    lineno + 2,
                    fields.len()
                ),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))
        };
        trace.push_record(TraceRecord {
            continuation: fields[0]
                .parse()
                .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))?,
            mu: num(1)?,
            eps_target: f64::NAN,
            eps_certified: num(2)?,
            eps_mu: num(3)?,
            eps_mu_clamped: false,
            fista_iters: fields[4]
                .parse()
                .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))?,
            gap: num(5)?,
            objective: num(6)?,
        });
    }
    Ok(trace)
}

/// One evaluation result row. `mse` and `dice` stay empty when ground truth
/// or folds are unavailable.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub method: String,
    pub dataset: String,
    pub reconstruction_error: f64,
    pub mse: Option<f64>,
    pub dice: Option<f64>,
}

/// Writes an evaluation report CSV with one row per (method, dataset).
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = String::from("method,dataset,reconstruction_error,mse,dice\n");
    for r in rows {
        let mse = r.mse.map(|v| v.to_string()).unwrap_or_default();
        let dice = r.dice.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.method, r.dataset, r.reconstruction_error, mse, dice
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Exports the nonzero operator entries as a `row,col,value` triplet CSV.
pub fn write_operator_triplets(path: &Path, op: &GroupLinearOperator<f64>) -> Result<()> {
    let mut out = String::from("row,col,value\n");
    for (r, c, v) in op.iter_entries() {
        writeln!(out, "{r},{c},{v}").expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Renders one loading over a 2D slice of the mask as a P2 graymap: zero maps
/// to mid-gray 128, the extremes to 128 ± 127·v/max|v|. Voxels outside the
/// mask render as mid-gray.
pub fn write_pgm(path: &Path, mask: &GridMask, v: ArrayView1<'_, f64>) -> Result<()> {
    let (ni, nj, nk) = mask.dims();
    if nk != 1 {
        return Err(Error::InvalidParameter(
            "image export needs a single-slice grid".into(),
        ));
    }
    if v.len() != mask.p() {
        return Err(Error::DimensionMismatch {
            expected: mask.p(),
            actual: v.len(),
        });
    }
    let max_abs = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut out = format!("P2\n{ni} {nj}\n255\n");
    for j in 0..nj {
        for i in 0..ni {
            if i > 0 {
                out.push(' ');
            }
            let gray = match mask.feature_index(i, j, 0) {
                Some(g) if max_abs > 0.0 => {
                    (128.0 + 127.0 * v[g] / max_abs).round().clamp(1.0, 255.0) as u8
                }
                _ => 128,
            };
            write!(out, "{gray}").expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
