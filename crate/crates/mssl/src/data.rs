//! Dataset containers and ingestion.
//!
//! A dataset is a list of tasks, each a design matrix plus response vector,
//! all sharing the same covariate count. On disk a dataset is a JSON manifest
//! pointing at one CSV file per task; see [`load_dataset`].

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which per-task loss the dataset is meant to be fit with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Logistic,
}

/// One task: design matrix `x` (n_k × d) and response `y` (length n_k).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub id: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl TaskData {
    pub fn num_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_covariates(&self) -> usize {
        self.x.ncols()
    }

    fn validate(&self) -> Result<()> {
        if self.x.nrows() == 0 || self.x.ncols() == 0 {
            return Err(Error::Shape(format!(
                "task '{}' must have at least one row and one covariate",
                self.id
            )));
        }
        if self.x.nrows() != self.y.len() {
            return Err(Error::Shape(format!(
                "task '{}': {} design rows but {} responses",
                self.id,
                self.x.nrows(),
                self.y.len()
            )));
        }
        if self.x.iter().any(|v| !v.is_finite()) || self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "task '{}' contains a non-finite value",
                self.id
            )));
        }
        Ok(())
    }
}

/// An ordered collection of tasks sharing a covariate space.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskDataset {
    pub loss: LossKind,
    pub tasks: Vec<TaskData>,
}

impl MultiTaskDataset {
    pub fn new(loss: LossKind, tasks: Vec<TaskData>) -> Result<Self> {
        let ds = MultiTaskDataset { loss, tasks };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.tasks.first().map_or(0, |t| t.x.ncols())
    }

    /// True when every task has the same number of rows.
    pub fn equal_rows(&self) -> bool {
        let mut rows = self.tasks.iter().map(|t| t.num_rows());
        match rows.next() {
            Some(first) => rows.all(|n| n == first),
            None => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Shape("dataset has no tasks".into()));
        }
        let d = self.tasks[0].x.ncols();
        let mut seen = BTreeSet::new();
        for task in &self.tasks {
            task.validate()?;
            if task.x.ncols() != d {
                return Err(Error::Shape(format!(
                    "task '{}' has {} covariates, expected {}",
                    task.id,
                    task.x.ncols(),
                    d
                )));
            }
            if !seen.insert(task.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate task id '{}'", task.id)));
            }
            if self.loss == LossKind::Logistic {
                if let Some(bad) = task.y.iter().find(|v| **v != 0.0 && **v != 1.0) {
                    return Err(Error::Invalid(format!(
                        "task '{}': label {} outside {{0,1}}",
                        task.id, bad
                    )));
                }
            }
        }
        Ok(())
    }

    /// Column means and population standard deviations per task; transformed
    /// copy has zero-mean/unit-std covariates and, for regression, centered
    /// responses. Labels are never touched.
    pub fn standardize(&self) -> (MultiTaskDataset, StandardizationStats) {
        let mut tasks = Vec::with_capacity(self.tasks.len());
        let mut stats = Vec::with_capacity(self.tasks.len());
        for task in &self.tasks {
            let n = task.x.nrows() as f64;
            let d = task.x.ncols();
            let mut mean = DVector::zeros(d);
            let mut std = DVector::from_element(d, 1.0);
            let mut constant = Vec::new();
            for j in 0..d {
                let col = task.x.column(j);
                let m = col.sum() / n;
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                mean[j] = m;
                if var.sqrt() > 0.0 {
                    std[j] = var.sqrt();
                } else {
                    constant.push(j);
                }
            }
            let mut x = task.x.clone();
            for j in 0..d {
                for i in 0..x.nrows() {
                    x[(i, j)] = (x[(i, j)] - mean[j]) / std[j];
                }
            }
            let response_mean = match self.loss {
                LossKind::Squared => task.y.sum() / n,
                LossKind::Logistic => 0.0,
            };
            let y = match self.loss {
                LossKind::Squared => task.y.map(|v| v - response_mean),
                LossKind::Logistic => task.y.clone(),
            };
            tasks.push(TaskData {
                id: task.id.clone(),
                x,
                y,
            });
            stats.push(TaskScaling {
                feature_mean: mean.as_slice().to_vec(),
                feature_std: std.as_slice().to_vec(),
                response_mean,
                constant_columns: constant,
            });
        }
        (
            MultiTaskDataset {
                loss: self.loss,
                tasks,
            },
            StandardizationStats { per_task: stats },
        )
    }
}

/// Per-task scaling learned by [`MultiTaskDataset::standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScaling {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Subtracted from regression responses; 0 for classification.
    pub response_mean: f64,
    /// Columns whose std was zero; their std is treated as 1.
    pub constant_columns: Vec<usize>,
}

impl TaskScaling {
    /// Apply the feature transform to a raw design matrix.
    pub fn transform_features(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.feature_mean.len() {
            return Err(Error::Shape(format!(
                "expected {} covariates, got {}",
                self.feature_mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] = (out[(i, j)] - self.feature_mean[j]) / self.feature_std[j];
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub per_task: Vec<TaskScaling>,
}

impl StandardizationStats {
    pub fn has_warnings(&self) -> bool {
        self.per_task.iter().any(|t| !t.constant_columns.is_empty())
    }
}

/// Parsed form of the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub loss: LossKind,
    pub tasks: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
}

/// Parse a manifest document. Paths are kept verbatim; resolution against the
/// manifest's directory happens in [`load_dataset`].
pub fn parse_manifest_str(text: &str) -> Result<Manifest> {
    let manifest: Manifest =
        serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
    if manifest.tasks.is_empty() {
        return Err(Error::Manifest("manifest lists no tasks".into()));
    }
    let mut seen = BTreeSet::new();
    for entry in &manifest.tasks {
        if entry.id.is_empty() {
            return Err(Error::Manifest("empty task id".into()));
        }
        if !seen.insert(entry.id.as_str()) {
            return Err(Error::Manifest(format!("duplicate task id '{}'", entry.id)));
        }
    }
    Ok(manifest)
}

/// Parse one task's CSV. Expects a header row, comma-separated numeric cells,
/// and the response in the last column.
pub fn parse_task_csv(id: &str, bytes: &[u8]) -> Result<TaskData> {
    let csv_err = |message: String| Error::Csv {
        task: id.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(csv_err(format!(
            "need at least one covariate column plus the response, got {} columns",
            headers.len()
        )));
    }
    if headers.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(csv_err(
            "first row parses entirely as numbers; a header row is required".into(),
        ));
    }
    let d = headers.len() - 1;
    let mut rows: Vec<f64> = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(csv_err(format!(
                "row {}: {} cells, expected {}",
                line + 2,
                record.len(),
                headers.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                csv_err(format!("row {}, column {}: non-numeric cell '{}'", line + 2, col + 1, cell))
            })?;
            if !value.is_finite() {
                return Err(csv_err(format!(
                    "row {}, column {}: non-finite value",
                    line + 2,
                    col + 1
                )));
            }
            if col < d {
                rows.push(value);
            } else {
                y.push(value);
            }
        }
    }
    if y.is_empty() {
        return Err(csv_err("no data rows after the header".into()));
    }
    let n = y.len();
    let task = TaskData {
        id: id.to_string(),
        x: DMatrix::from_row_slice(n, d, &rows),
        y: DVector::from_vec(y),
    };
    task.validate()?;
    Ok(task)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a dataset from a manifest file. Task paths resolve relative to the
/// manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<MultiTaskDataset> {
    let text = read_file(manifest_path)?;
    let text = String::from_utf8(text)
        .map_err(|_| Error::Manifest("manifest is not valid UTF-8".into()))?;
    let manifest = parse_manifest_str(&text)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for entry in &manifest.tasks {
        let path = base.join(&entry.path);
        let bytes = read_file(&path)?;
        tasks.push(parse_task_csv(&entry.id, &bytes)?);
    }
    MultiTaskDataset::new(manifest.loss, tasks)
}

/// Write a dataset as `manifest.json` plus one CSV per task inside `dir`.
/// Returns the manifest path. Values print in shortest round-trip form, so a
/// reload reproduces every bit.
pub fn write_dataset(ds: &MultiTaskDataset, dir: &Path) -> Result<PathBuf> {
    write_dataset_as(ds, dir, "manifest.json")
}

/// Same as [`write_dataset`] with a caller-chosen manifest file name, so that
/// several splits can share one directory.
pub fn write_dataset_as(ds: &MultiTaskDataset, dir: &Path, manifest_name: &str) -> Result<PathBuf> {
    ds.validate()?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let stem = manifest_name.strip_suffix(".json").unwrap_or(manifest_name);
    let mut entries = Vec::with_capacity(ds.tasks.len());
    let mut used = BTreeSet::new();
    for task in &ds.tasks {
        let mut name = sanitize_file_stem(&task.id);
        if !used.insert(name.clone()) {
            let mut i = 2;
            while !used.insert(format!("{name}_{i}")) {
                i += 1;
            }
            name = format!("{name}_{i}");
        }
        let file = format!("{stem}_{name}.csv");
        write_task_csv(task, &dir.join(&file))?;
        entries.push(ManifestEntry {
            id: task.id.clone(),
            path: file,
        });
    }
    let manifest = Manifest {
        loss: ds.loss,
        tasks: entries,
    };
    let path = dir.join(manifest_name);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Map a task id onto a filesystem-safe stem (alphanumerics, `-`, `_`).
pub fn sanitize_file_stem(id: &str) -> String {
    let cleaned: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if cleaned.is_empty() {
        "task".to_string()
    } else {
        cleaned
    }
}

fn write_task_csv(task: &TaskData, path: &Path) -> Result<()> {
    let mut out = String::new();
    let d = task.x.ncols();
    for j in 0..d {
        out.push_str(&format!("x{},", j + 1));
    }
    out.push_str("y\n");
    for i in 0..task.x.nrows() {
        for j in 0..d {
            out.push_str(&format!("{},", task.x[(i, j)]));
        }
        out.push_str(&format!("{}\n", task.y[i]));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
