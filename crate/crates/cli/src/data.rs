//! Locates and loads datasets for fit and evaluate: a bare CSV matrix, one
//! dataset directory, or a directory of dataset_* subdirectories.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use spcatv::io::{read_dataset, read_matrix_csv};
use spcatv::{Error, Result};

/// One loaded dataset. `side` is known only for generated datasets, where it
/// provides the full-grid structure fallback; `v_true` likewise.
pub struct Dataset {
    pub name: String,
    pub x: Array2<f64>,
    pub v_true: Option<Array2<f64>>,
    pub side: Option<usize>,
}

/// Loads a single dataset from a directory with meta.json or a CSV file.
pub fn load_single(path: &Path) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    if path.is_dir() {
        let (x, v_true, meta) = read_dataset(path)?;
        Ok(Dataset {
            name,
            x,
            v_true,
            side: Some(meta.side),
        })
    } else {
        let x = read_matrix_csv(path)?;
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Parse(format!(
                "{}: empty data matrix",
                path.display()
            )));
        }
        Ok(Dataset {
            name,
            x,
            v_true: None,
            side: None,
        })
    }
}

/// For evaluate: a directory containing dataset_* subdirectories yields them
/// in name order; anything else is treated as one dataset.
pub fn discover(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() && !path.join("meta.json").exists() {
        let mut subdirs: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_dir()
                    && p.file_name()
                        .is_some_and(|n| n.to_string_lossy().starts_with("dataset_"))
            })
            .collect();
        if subdirs.is_empty() {
            return Err(Error::Parse(format!(
                "{}: no meta.json and no dataset_* subdirectories",
                path.display()
            )));
        }
        subdirs.sort();
        return Ok(subdirs);
    }
    Ok(vec![path.to_path_buf()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("spcatv-data-{}-{tag}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn csv_file_loads_without_ground_truth() {
        let dir = scratch("csv");
        let path = dir.join("x.csv");
        std::fs::write(&path, "1,2\n3,4\n").unwrap();
        let ds = load_single(&path).unwrap();
        assert_eq!(ds.x.dim(), (2, 2));
        assert!(ds.v_true.is_none());
        assert!(ds.side.is_none());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn discovery_orders_dataset_directories() {
        let dir = scratch("disc");
        for name in ["dataset_002", "dataset_000", "dataset_001", "other"] {
            std::fs::create_dir_all(dir.join(name)).unwrap();
        }
        let found = discover(&dir).unwrap();
        let names: Vec<_> = found
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["dataset_000", "dataset_001", "dataset_002"]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn lone_path_is_its_own_collection() {
        let dir = scratch("lone");
        let path = dir.join("x.csv");
        std::fs::write(&path, "1\n").unwrap();
        assert_eq!(discover(&path).unwrap(), vec![path]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
