//! Reference methods the joint estimator is compared against: independent
//! per-task fits, the equal-weight average of covariates, the best single
//! covariate, and regression under a fixed graph-Laplacian coupling.

use nalgebra::{DMatrix, DVector};

use crate::data::{LossKind, MultiTaskDataset};
use crate::error::{Error, Result};
use crate::wstep::{fista_solve, WStepConfig, WStepSolution};

/// Per-task weights fit with no cross-task coupling.
#[derive(Debug, Clone)]
pub struct IndependentFit {
    pub weights: DMatrix<f64>,
    /// Tasks whose normal equations needed the ridge fallback.
    pub ridged_tasks: Vec<String>,
}

/// Baseline problems are small, so the proximal fits run to a much tighter
/// stop than the joint estimator defaults.
fn tight_config(gamma: f64) -> WStepConfig {
    WStepConfig {
        max_iters: 5000,
        tol: 1e-14,
        ..WStepConfig::with_gamma(gamma)
    }
}

/// Fit every task separately: plain normal equations for the unpenalized
/// squared loss, otherwise a per-task proximal solve. Rank-deficient systems
/// fall back to a 1e-10 ridge and are flagged.
pub fn fit_independent(ds: &MultiTaskDataset, gamma: f64) -> Result<IndependentFit> {
    ds.validate()?;
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::Invalid(format!("gamma must be ≥ 0, got {gamma}")));
    }
    let d = ds.num_covariates();
    let mut weights = DMatrix::zeros(d, ds.num_tasks());
    let mut ridged_tasks = Vec::new();
    for (k, task) in ds.tasks.iter().enumerate() {
        if ds.loss == LossKind::Squared && gamma == 0.0 {
            let gram = task.x.transpose() * &task.x;
            let rhs = task.x.transpose() * &task.y;
            let solved = match gram.clone().cholesky() {
                Some(chol) => chol.solve(&rhs),
                None => {
                    ridged_tasks.push(task.id.clone());
                    let ridged = gram + DMatrix::identity(d, d) * 1e-10;
                    ridged
                        .cholesky()
                        .ok_or_else(|| Error::Singular(format!("task '{}'", task.id)))?
                        .solve(&rhs)
                }
            };
            weights.column_mut(k).copy_from(&solved);
        } else {
            let single = MultiTaskDataset {
                loss: ds.loss,
                tasks: vec![task.clone()],
            };
            let omega = DMatrix::zeros(1, 1);
            let sol = fista_solve(&single, &omega, &tight_config(gamma), None)?;
            weights.column_mut(k).copy_from(&sol.weights.column(0));
        }
    }
    Ok(IndependentFit {
        weights,
        ridged_tasks,
    })
}

/// Equal-weight combination: the mean of each covariate row. Each covariate
/// is treated as a submodel's prediction.
pub fn average_predict(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x.ncols() == 0 {
        return Err(Error::Shape("need at least one covariate".into()));
    }
    let d = x.ncols() as f64;
    Ok(DVector::from_iterator(
        x.nrows(),
        x.row_iter().map(|r| r.sum() / d),
    ))
}

/// For each task, the covariate index whose column, used directly as the
/// prediction, minimizes training RMSE; returned with that RMSE.
pub fn best_single_covariate(ds: &MultiTaskDataset) -> Result<Vec<(usize, f64)>> {
    ds.validate()?;
    let mut out = Vec::with_capacity(ds.num_tasks());
    for task in &ds.tasks {
        let n = task.num_rows() as f64;
        let mut best = (0usize, f64::INFINITY);
        for j in 0..task.num_covariates() {
            let sq = task
                .x
                .column(j)
                .iter()
                .zip(task.y.iter())
                .map(|(p, y)| (p - y) * (p - y))
                .sum::<f64>();
            let rmse = (sq / n).sqrt();
            if rmse < best.1 {
                best = (j, rmse);
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// A task-graph Laplacian and the edge list it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSpec {
    pub matrix: DMatrix<f64>,
    /// Pairs (a, b) with a < b, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl LaplacianSpec {
    /// Build L = D − A from an explicit edge list over `k` nodes.
    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Result<LaplacianSpec> {
        if k == 0 {
            return Err(Error::Invalid("need at least one node".into()));
        }
        let mut normalized: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b || a >= k || b >= k {
                return Err(Error::Invalid(format!("edge ({a},{b}) is not valid for {k} nodes")));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        let mut matrix = DMatrix::zeros(k, k);
        for &(a, b) in &normalized {
            matrix[(a, b)] = -1.0;
            matrix[(b, a)] = -1.0;
            matrix[(a, a)] += 1.0;
            matrix[(b, b)] += 1.0;
        }
        Ok(LaplacianSpec {
            matrix,
            edges: normalized,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }
}

/// 4-neighborhood grid-graph Laplacian; node (r, c) has index r·cols + c.
pub fn grid_laplacian(rows: usize, cols: usize) -> Result<LaplacianSpec> {
    if rows == 0 || cols == 0 {
        return Err(Error::Invalid("grid dimensions must be positive".into()));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = r * cols + c;
            if c + 1 < cols {
                edges.push((here, here + 1));
            }
            if r + 1 < rows {
                edges.push((here, here + cols));
            }
        }
    }
    LaplacianSpec::from_edges(rows * cols, &edges)
}

/// One weight-step solve with the coupling fixed to `multiplier · L`; no
/// structure estimation. The usual multiplier is 1.
pub fn fit_fixed_structure(
    ds: &MultiTaskDataset,
    lap: &LaplacianSpec,
    multiplier: f64,
    gamma: f64,
) -> Result<WStepSolution> {
    if lap.num_nodes() != ds.num_tasks() {
        return Err(Error::Shape(format!(
            "Laplacian has {} nodes but the dataset has {} tasks",
            lap.num_nodes(),
            ds.num_tasks()
        )));
    }
    if multiplier < 0.0 || !multiplier.is_finite() {
        return Err(Error::Invalid(format!("multiplier must be ≥ 0, got {multiplier}")));
    }
    let coupling = &lap.matrix * multiplier;
    fista_solve(ds, &coupling, &tight_config(gamma), None)
}
