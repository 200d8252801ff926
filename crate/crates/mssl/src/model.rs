//! Trained-model container: weights, precision structure, scaling metadata,
//! prediction, and a validated JSON representation.
//!
//! Serialization prints floats in shortest round-trip form, so
//! serialize → parse → serialize is byte-identical and matrices survive
//! bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::data::{LossKind, StandardizationStats};
use crate::error::{Error, Result};
use crate::losses;

/// Which estimator produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "p-mssl")]
    PMssl,
    #[serde(rename = "r-mssl")]
    RMssl,
    #[serde(rename = "fixed-structure")]
    FixedStructure,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::PMssl => "p-mssl",
            Variant::RMssl => "r-mssl",
            Variant::FixedStructure => "fixed-structure",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p-mssl" => Ok(Variant::PMssl),
            "r-mssl" => Ok(Variant::RMssl),
            "fixed-structure" => Ok(Variant::FixedStructure),
            other => Err(Error::Invalid(format!("unknown variant '{other}'"))),
        }
    }
}

/// Precision estimate plus the exact-zero pattern it was solved with.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    pub omega: DMatrix<f64>,
    /// Off-diagonal pairs (i, j), i < j, sorted lexicographically.
    pub support: Vec<(usize, usize)>,
}

impl PrecisionMatrix {
    pub fn identity(k: usize) -> Self {
        PrecisionMatrix {
            omega: DMatrix::identity(k, k),
            support: Vec::new(),
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.omega.nrows()
    }

    /// −ω_ij / √(ω_ii ω_jj).
    pub fn partial_correlation(&self, i: usize, j: usize) -> f64 {
        -self.omega[(i, j)] / (self.omega[(i, i)] * self.omega[(j, j)]).sqrt()
    }

    /// Shape, symmetry, support indexing, and an eigenvalue floor. Fixed
    /// couplings (graph Laplacians) are singular, so semidefinite suffices
    /// here; learned precisions go through [`Self::validate`] instead.
    pub fn validate_psd(&self) -> Result<()> {
        let k = self.omega.nrows();
        if self.omega.ncols() != k {
            return Err(Error::Shape("precision matrix must be square".into()));
        }
        if self.omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("precision matrix has non-finite entries".into()));
        }
        let scale = self.omega.amax().max(1.0);
        for i in 0..k {
            for j in (i + 1)..k {
                if (self.omega[(i, j)] - self.omega[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::Asymmetric(format!(
                        "precision entry ({i},{j}) differs from its transpose"
                    )));
                }
            }
        }
        let min_eig = self.omega.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-8 * scale {
            return Err(Error::NotPositiveDefinite(format!(
                "precision matrix has eigenvalue {min_eig}"
            )));
        }
        let mut seen = BTreeSet::new();
        for &(i, j) in &self.support {
            if i >= j || j >= k {
                return Err(Error::Invalid(format!(
                    "support pair ({i},{j}) is not an upper-triangle index"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Invalid(format!("duplicate support pair ({i},{j})")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_psd()?;
        if self.omega.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("precision matrix".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub variant: Variant,
    pub loss: LossKind,
    pub task_ids: Vec<String>,
    /// Raw covariate count, excluding any intercept row.
    pub num_covariates: usize,
    /// When set, `weights` carries one extra trailing row for the intercept.
    pub intercept: bool,
    pub lambda: f64,
    pub gamma: f64,
    pub logdet_coeff: f64,
    pub weights: DMatrix<f64>,
    pub precision: PrecisionMatrix,
    /// Present when the model was fit on standardized data; prediction then
    /// applies the same transform to incoming features.
    pub standardization: Option<StandardizationStats>,
    /// Joint objective after each outer iteration, initial point first.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl TrainedModel {
    pub fn num_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn weight_rows(&self) -> usize {
        self.num_covariates.saturating_add(usize::from(self.intercept))
    }

    pub fn task_index(&self, task_id: &str) -> Result<usize> {
        self.task_ids
            .iter()
            .position(|id| id == task_id)
            .ok_or_else(|| Error::Invalid(format!("model has no task '{task_id}'")))
    }

    /// Linear scores X̃w (plus intercept) for one task's raw feature rows.
    fn scores(&self, task: usize, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.num_covariates {
            return Err(Error::Shape(format!(
                "expected {} covariates, got {}",
                self.num_covariates,
                x.ncols()
            )));
        }
        let transformed = match &self.standardization {
            Some(stats) => stats.per_task[task].transform_features(x)?,
            None => x.clone(),
        };
        let w = self.weights.column(task);
        let mut z = &transformed * w.rows(0, self.num_covariates);
        if self.intercept {
            z.add_scalar_mut(w[self.num_covariates]);
        }
        Ok(z)
    }

    /// Predict responses for a task: the regression value for the squared
    /// loss, the positive-class probability for the logistic loss.
    pub fn predict(&self, task_id: &str, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let task = self.task_index(task_id)?;
        let z = self.scores(task, x)?;
        Ok(match self.loss {
            LossKind::Squared => {
                let shift = self
                    .standardization
                    .as_ref()
                    .map_or(0.0, |s| s.per_task[task].response_mean);
                z.add_scalar(shift)
            }
            LossKind::Logistic => z.map(losses::sigmoid),
        })
    }

    /// Hard 0/1 labels at the 0.5 probability threshold.
    pub fn predict_labels(&self, task_id: &str, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if self.loss != LossKind::Logistic {
            return Err(Error::Invalid("labels are defined for the logistic loss".into()));
        }
        let p = self.predict(task_id, x)?;
        Ok(p.map(|v| if v >= 0.5 { 1.0 } else { 0.0 }))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.task_ids.len();
        if k == 0 {
            return Err(Error::Shape("model has no tasks".into()));
        }
        let mut seen = BTreeSet::new();
        for id in &self.task_ids {
            if id.is_empty() {
                return Err(Error::Invalid("empty task id".into()));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::Invalid(format!("duplicate task id '{id}'")));
            }
        }
        if self.weights.nrows() != self.weight_rows() || self.weights.ncols() != k {
            return Err(Error::Shape(format!(
                "weights are {}x{}, expected {}x{}",
                self.weights.nrows(),
                self.weights.ncols(),
                self.weight_rows(),
                k
            )));
        }
        if self.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("weights have non-finite entries".into()));
        }
        if self.precision.num_tasks() != k {
            return Err(Error::Shape("precision size does not match the task count".into()));
        }
        match self.variant {
            Variant::FixedStructure => self.precision.validate_psd()?,
            Variant::PMssl | Variant::RMssl => self.precision.validate()?,
        }
        if self.lambda < 0.0 || self.gamma < 0.0 || !(self.logdet_coeff > 0.0) {
            return Err(Error::Invalid("penalties must be ≥ 0 and logdet_coeff > 0".into()));
        }
        if let Some(stats) = &self.standardization {
            if stats.per_task.len() != k {
                return Err(Error::Shape("one scaling record per task required".into()));
            }
            for scaling in &stats.per_task {
                if scaling.feature_mean.len() != self.num_covariates
                    || scaling.feature_std.len() != self.num_covariates
                {
                    return Err(Error::Shape("scaling length does not match covariates".into()));
                }
            }
        }
        if self.objective_trace.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("objective trace has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        self.validate()?;
        let doc = ModelDoc {
            variant: self.variant,
            loss: self.loss,
            task_ids: self.task_ids.clone(),
            num_covariates: self.num_covariates,
            intercept: self.intercept,
            lambda: self.lambda,
            gamma: self.gamma,
            logdet_coeff: self.logdet_coeff,
            weights: matrix_rows(&self.weights),
            omega: matrix_rows(&self.precision.omega),
            support: self.precision.support.clone(),
            standardization: self.standardization.clone(),
            objective_trace: self.objective_trace.clone(),
            converged: self.converged,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Json(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<TrainedModel> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        let k = doc.task_ids.len();
        let rows = doc.num_covariates.saturating_add(usize::from(doc.intercept));
        let weights = rows_to_matrix(&doc.weights, rows, k, "weights")?;
        let omega = rows_to_matrix(&doc.omega, k, k, "omega")?;
        let model = TrainedModel {
            variant: doc.variant,
            loss: doc.loss,
            task_ids: doc.task_ids,
            num_covariates: doc.num_covariates,
            intercept: doc.intercept,
            lambda: doc.lambda,
            gamma: doc.gamma,
            logdet_coeff: doc.logdet_coeff,
            weights,
            precision: PrecisionMatrix {
                omega,
                support: doc.support,
            },
            standardization: doc.standardization,
            objective_trace: doc.objective_trace,
            converged: doc.converged,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = self.to_json_string()?;
        std::fs::write(path, json + "\n").map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<TrainedModel> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    variant: Variant,
    loss: LossKind,
    task_ids: Vec<String>,
    num_covariates: usize,
    intercept: bool,
    lambda: f64,
    gamma: f64,
    logdet_coeff: f64,
    /// Row-major weight matrix, one inner array per covariate row.
    weights: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
    support: Vec<(usize, usize)>,
    standardization: Option<StandardizationStats>,
    objective_trace: Vec<f64>,
    converged: bool,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{what} must be {nrows}x{ncols}")));
    }
    let mut m = DMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}
