//! Synthetic benchmarks with known weights and known task structure, plus
//! the metrics used to score fits against them.
//!
//! Two generators: clustered tasks (groups share a parameter center, leftover
//! tasks are unrelated) and a spatial grid (weights vary smoothly over the
//! grid, residual rows are correlated across neighboring tasks through a
//! Laplacian precision). All draws run in a documented fixed order from one
//! seeded stream, so identical specs regenerate identical bytes.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::grid_laplacian;
use crate::data::{LossKind, MultiTaskDataset, TaskData};
use crate::error::{Error, Result};
use crate::model::TrainedModel;

/// Clustered-task benchmark layout. `clusters` lists task-index groups that
/// share a center; tasks in no group get independent parameters.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub num_tasks: usize,
    pub num_covariates: usize,
    pub n_total: usize,
    pub n_train: usize,
    pub clusters: Vec<Vec<usize>>,
    /// Std of each cluster-center coordinate.
    pub center_scale: f64,
    /// Std of the per-task perturbation around its cluster center.
    pub within_cluster_spread: f64,
    /// Std of unclustered task parameters.
    pub singleton_scale: f64,
    pub noise_std: f64,
    /// One design matrix shared by every task; false draws one per task.
    pub shared_design: bool,
    pub seed: u64,
}

impl ClusterSpec {
    /// 13 tasks, 30 covariates, 100 rows (60 train), clusters {1–4} and
    /// {5–10}, three unrelated tasks.
    pub fn benchmark(seed: u64) -> ClusterSpec {
        ClusterSpec {
            num_tasks: 13,
            num_covariates: 30,
            n_total: 100,
            n_train: 60,
            clusters: vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7, 8, 9]],
            center_scale: 1.0,
            within_cluster_spread: 0.1,
            singleton_scale: 1.0,
            noise_std: 1.0,
            shared_design: true,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 || self.num_covariates == 0 {
            return Err(Error::Invalid("need at least one task and one covariate".into()));
        }
        if !(self.n_train >= 1 && self.n_train < self.n_total) {
            return Err(Error::Invalid(format!(
                "need 1 ≤ n_train < n_total, got {} / {}",
                self.n_train, self.n_total
            )));
        }
        let mut seen = BTreeSet::new();
        for group in &self.clusters {
            if group.is_empty() {
                return Err(Error::Invalid("empty cluster group".into()));
            }
            for &t in group {
                if t >= self.num_tasks {
                    return Err(Error::Invalid(format!(
                        "cluster references task {t}, but there are {} tasks",
                        self.num_tasks
                    )));
                }
                if !seen.insert(t) {
                    return Err(Error::Invalid(format!("task {t} appears in two clusters")));
                }
            }
        }
        for &v in &[
            self.center_scale,
            self.within_cluster_spread,
            self.singleton_scale,
            self.noise_std,
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Invalid(format!("scales must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Spatial benchmark layout: tasks on a grid, residual rows drawn with
/// precision κ·L + τ·I, weights a smooth field over the same grid.
#[derive(Debug, Clone)]
pub struct SpatialSpec {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub num_covariates: usize,
    pub n_total: usize,
    pub n_train: usize,
    /// Residual coupling strength along grid edges.
    pub kappa: f64,
    /// Residual precision ridge; must be positive.
    pub tau: f64,
    /// Amplitude of the smooth weight field.
    pub weight_scale: f64,
    pub seed: u64,
}

impl SpatialSpec {
    /// 6×6 grid, 10 covariates, 80 rows (40 train).
    pub fn benchmark(seed: u64) -> SpatialSpec {
        SpatialSpec {
            grid_rows: 6,
            grid_cols: 6,
            num_covariates: 10,
            n_total: 80,
            n_train: 40,
            kappa: 4.0,
            tau: 1.0,
            weight_scale: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::Invalid("grid dimensions must be positive".into()));
        }
        if self.num_covariates == 0 {
            return Err(Error::Invalid("need at least one covariate".into()));
        }
        if !(self.n_train >= 1 && self.n_train < self.n_total) {
            return Err(Error::Invalid(format!(
                "need 1 ≤ n_train < n_total, got {} / {}",
                self.n_train, self.n_total
            )));
        }
        if self.kappa < 0.0 || !self.kappa.is_finite() {
            return Err(Error::Invalid(format!("kappa must be ≥ 0, got {}", self.kappa)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.weight_scale < 0.0 || !self.weight_scale.is_finite() {
            return Err(Error::Invalid("weight_scale must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// What the generator knows and the estimator is asked to recover.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub weights: DMatrix<f64>,
    /// Pairs (a, b), a < b, sorted.
    pub edges: Vec<(usize, usize)>,
    pub notes: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthDoc {
    weights: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    notes: String,
}

impl GroundTruth {
    pub fn to_json_string(&self) -> Result<String> {
        let doc = GroundTruthDoc {
            weights: (0..self.weights.nrows())
                .map(|i| (0..self.weights.ncols()).map(|j| self.weights[(i, j)]).collect())
                .collect(),
            edges: self.edges.clone(),
            notes: self.notes.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Json(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<GroundTruth> {
        let doc: GroundTruthDoc =
            serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        let rows = doc.weights.len();
        let cols = doc.weights.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 || doc.weights.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("weights must be a non-empty rectangle".into()));
        }
        let mut weights = DMatrix::zeros(rows, cols);
        for (i, row) in doc.weights.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                weights[(i, j)] = *v;
            }
        }
        Ok(GroundTruth {
            weights,
            edges: doc.edges,
            notes: doc.notes,
        })
    }
}

/// A generated benchmark: train and test splits plus the generating truth.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub train: MultiTaskDataset,
    pub test: MultiTaskDataset,
    pub truth: GroundTruth,
}

fn task_ids(k: usize) -> Vec<String> {
    let width = k.to_string().len();
    (1..=k).map(|i| format!("t{i:0width$}")).collect()
}

fn normal_vector<R: Rng>(rng: &mut R, len: usize, scale: f64) -> DVector<f64> {
    let mut v = DVector::zeros(len);
    for i in 0..len {
        v[i] = scale * rng.sample::<f64, _>(StandardNormal);
    }
    v
}

fn normal_matrix_rowwise<R: Rng>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            m[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

fn split_rows(
    ids: &[String],
    designs: &[DMatrix<f64>],
    responses: &[DVector<f64>],
    order: &[usize],
    n_train: usize,
) -> Result<(MultiTaskDataset, MultiTaskDataset)> {
    let take = |range: &[usize], k: usize| -> TaskData {
        let x = DMatrix::from_fn(range.len(), designs[k].ncols(), |i, j| {
            designs[k][(range[i], j)]
        });
        let y = DVector::from_fn(range.len(), |i, _| responses[k][range[i]]);
        TaskData {
            id: ids[k].clone(),
            x,
            y,
        }
    };
    let train_rows = &order[..n_train];
    let test_rows = &order[n_train..];
    let train = MultiTaskDataset::new(
        LossKind::Squared,
        (0..ids.len()).map(|k| take(train_rows, k)).collect(),
    )?;
    let test = MultiTaskDataset::new(
        LossKind::Squared,
        (0..ids.len()).map(|k| take(test_rows, k)).collect(),
    )?;
    Ok((train, test))
}

/// Pearson correlation between two equally long vectors.
fn correlation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Draw the clustered-task benchmark. Draw order: design(s), cluster centers,
/// per-task parameters, per-task noise, then one row shuffle shared by all
/// tasks (first `n_train` shuffled rows are the train split).
pub fn generate_cluster_tasks(spec: &ClusterSpec) -> Result<GeneratedData> {
    spec.validate()?;
    let k = spec.num_tasks;
    let d = spec.num_covariates;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let designs: Vec<DMatrix<f64>> = if spec.shared_design {
        let shared = normal_matrix_rowwise(&mut rng, spec.n_total, d);
        vec![shared; k]
    } else {
        (0..k)
            .map(|_| normal_matrix_rowwise(&mut rng, spec.n_total, d))
            .collect()
    };

    let centers: Vec<DVector<f64>> = spec
        .clusters
        .iter()
        .map(|_| normal_vector(&mut rng, d, spec.center_scale))
        .collect();
    let cluster_of = |t: usize| spec.clusters.iter().position(|g| g.contains(&t));

    let mut weights = DMatrix::zeros(d, k);
    for t in 0..k {
        let w = match cluster_of(t) {
            Some(c) => &centers[c] + normal_vector(&mut rng, d, spec.within_cluster_spread),
            None => normal_vector(&mut rng, d, spec.singleton_scale),
        };
        weights.set_column(t, &w);
    }

    let responses: Vec<DVector<f64>> = (0..k)
        .map(|t| {
            let noise = normal_vector(&mut rng, spec.n_total, spec.noise_std);
            &designs[t] * weights.column(t) + noise
        })
        .collect();

    let mut order: Vec<usize> = (0..spec.n_total).collect();
    order.shuffle(&mut rng);

    let ids = task_ids(k);
    let (train, test) = split_rows(&ids, &designs, &responses, &order, spec.n_train)?;

    let mut edges = Vec::new();
    for group in &spec.clusters {
        let mut sorted = group.clone();
        sorted.sort_unstable();
        for i in 0..sorted.len() {
            for j in (i + 1)..sorted.len() {
                edges.push((sorted[i], sorted[j]));
            }
        }
    }
    edges.sort_unstable();

    check_cluster_separation(spec, &weights)?;
    let notes = format!(
        "clustered tasks: {} groups, centers N(0, {}²I), within-cluster spread {}, \
         singleton scale {}, noise std {}, shared design: {}, seed {}",
        spec.clusters.len(),
        spec.center_scale,
        spec.within_cluster_spread,
        spec.singleton_scale,
        spec.noise_std,
        spec.shared_design,
        spec.seed
    );

    Ok(GeneratedData {
        train,
        test,
        truth: GroundTruth {
            weights,
            edges,
            notes,
        },
    })
}

/// Generated parameters must actually exhibit the cluster structure: mean
/// within-cluster correlation strictly above mean cross-pair correlation.
fn check_cluster_separation(spec: &ClusterSpec, weights: &DMatrix<f64>) -> Result<()> {
    let k = spec.num_tasks;
    let cluster_of = |t: usize| spec.clusters.iter().position(|g| g.contains(&t));
    let mut within = Vec::new();
    let mut cross = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let r = correlation(&weights.column(a).into_owned(), &weights.column(b).into_owned());
            match (cluster_of(a), cluster_of(b)) {
                (Some(ca), Some(cb)) if ca == cb => within.push(r),
                _ => cross.push(r),
            }
        }
    }
    if within.is_empty() || cross.is_empty() {
        return Ok(());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    if mean(&within) <= mean(&cross) {
        return Err(Error::Invalid(
            "generated parameters do not separate the clusters; \
             lower within_cluster_spread or raise center_scale"
                .into(),
        ));
    }
    Ok(())
}

/// Q diag((a·μ + b)^{-1/2}) Qᵀ for the Laplacian eigendecomposition QμQᵀ:
/// the square root of the covariance whose precision is a·L + b·I.
fn covariance_sqrt(eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, a: f64, b: f64) -> DMatrix<f64> {
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|mu| 1.0 / (a * mu.max(0.0) + b).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&scaled) * eig.eigenvectors.transpose()
}

/// Draw the spatial benchmark. Draw order: smooth weight field (one grid
/// field per covariate), per-task designs, residual rows, then one shared row
/// shuffle. Residual row i is one draw from N(0, (κL + τI)⁻¹), so the same
/// split must keep rows aligned across tasks, and it does.
pub fn generate_spatial_tasks(spec: &SpatialSpec) -> Result<GeneratedData> {
    spec.validate()?;
    let k = spec.grid_rows * spec.grid_cols;
    let d = spec.num_covariates;
    let lap = grid_laplacian(spec.grid_rows, spec.grid_cols)?;
    let eig = nalgebra::SymmetricEigen::new(lap.matrix.clone());
    // weight smoothness uses the fixed precision L + I
    let weight_half = covariance_sqrt(&eig, 1.0, 1.0);
    let noise_half = covariance_sqrt(&eig, spec.kappa, spec.tau);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut weights = DMatrix::zeros(d, k);
    for j in 0..d {
        let z = normal_vector(&mut rng, k, 1.0);
        let field = &weight_half * z * spec.weight_scale;
        for t in 0..k {
            weights[(j, t)] = field[t];
        }
    }

    let designs: Vec<DMatrix<f64>> = (0..k)
        .map(|_| normal_matrix_rowwise(&mut rng, spec.n_total, d))
        .collect();

    let mut residuals = DMatrix::zeros(spec.n_total, k);
    for i in 0..spec.n_total {
        let z = normal_vector(&mut rng, k, 1.0);
        let row = &noise_half * z;
        for t in 0..k {
            residuals[(i, t)] = row[t];
        }
    }

    let responses: Vec<DVector<f64>> = (0..k)
        .map(|t| &designs[t] * weights.column(t) + residuals.column(t))
        .collect();

    let mut order: Vec<usize> = (0..spec.n_total).collect();
    order.shuffle(&mut rng);

    let ids = task_ids(k);
    let (train, test) = split_rows(&ids, &designs, &responses, &order, spec.n_train)?;

    let notes = format!(
        "spatial tasks on a {}×{} grid: smooth weight field (precision L+I, scale {}), \
         residual precision {}·L + {}·I, seed {}",
        spec.grid_rows, spec.grid_cols, spec.weight_scale, spec.kappa, spec.tau, spec.seed
    );

    Ok(GeneratedData {
        train,
        test,
        truth: GroundTruth {
            weights,
            edges: lap.edges,
            notes,
        },
    })
}

/// Set-overlap quality of an estimated edge set. Pairs are unordered; self
/// pairs are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn edge_metrics(estimated: &[(usize, usize)], truth: &[(usize, usize)]) -> EdgeMetrics {
    let normalize = |edges: &[(usize, usize)]| -> BTreeSet<(usize, usize)> {
        edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect()
    };
    let est = normalize(estimated);
    let tru = normalize(truth);
    let hits = est.intersection(&tru).count() as f64;
    let precision = if est.is_empty() {
        if tru.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        hits / est.len() as f64
    };
    let recall = if tru.is_empty() { 1.0 } else { hits / tru.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    EdgeMetrics {
        precision,
        recall,
        f1,
    }
}

/// √(mean squared difference).
pub fn rmse(pred: &DVector<f64>, actual: &DVector<f64>) -> Result<f64> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::Shape("prediction and target lengths differ".into()));
    }
    let n = pred.len() as f64;
    Ok(((pred - actual).norm_squared() / n).sqrt())
}

/// Fraction of mismatched 0/1 labels.
pub fn error_rate(pred: &DVector<f64>, actual: &DVector<f64>) -> Result<f64> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::Shape("prediction and target lengths differ".into()));
    }
    let wrong = pred
        .iter()
        .zip(actual.iter())
        .filter(|(p, a)| (**p != 0.0) != (**a != 0.0))
        .count();
    Ok(wrong as f64 / pred.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TaskScore {
    pub id: String,
    pub score: f64,
}

/// Per-task scores plus their mean and population std across tasks. The
/// score is RMSE for regression and 0/1 error rate (0.5 threshold) for
/// classification.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_task: Vec<TaskScore>,
    pub mean: f64,
    pub std: f64,
}

pub fn evaluate(model: &TrainedModel, ds: &MultiTaskDataset) -> Result<EvalReport> {
    if ds.loss != model.loss {
        return Err(Error::Invalid("dataset loss does not match the model".into()));
    }
    let mut per_task = Vec::with_capacity(ds.num_tasks());
    for task in &ds.tasks {
        let score = match model.loss {
            LossKind::Squared => {
                let pred = model.predict(&task.id, &task.x)?;
                rmse(&pred, &task.y)?
            }
            LossKind::Logistic => {
                let labels = model.predict_labels(&task.id, &task.x)?;
                error_rate(&labels, &task.y)?
            }
        };
        per_task.push(TaskScore {
            id: task.id.clone(),
            score,
        });
    }
    let n = per_task.len() as f64;
    let mean = per_task.iter().map(|t| t.score).sum::<f64>() / n;
    let var = per_task
        .iter()
        .map(|t| (t.score - mean) * (t.score - mean))
        .sum::<f64>()
        / n;
    Ok(EvalReport {
        per_task,
        mean,
        std: var.sqrt(),
    })
}
