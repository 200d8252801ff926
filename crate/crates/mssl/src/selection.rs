//! Hyperparameter selection: subsampling-based stability of the recovered
//! task structure, and plain cross-validated grid search on predictive score.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{MultiTaskDataset, TaskData};
use crate::error::{Error, Result};
use crate::estimator::{fit_joint, SolverConfig};
use crate::model::Variant;
use crate::synthetic::evaluate;

/// Spread applied to the base seed so each subsample gets its own stream.
const SUBSAMPLE_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Fraction of fits allowed to fail before the whole selection run aborts.
const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct StabilityConfig {
    /// Strictly ascending, positive.
    pub lambda_grid: Vec<f64>,
    pub n_subsamples: usize,
    /// Fraction of each task's rows kept per subsample, in (0, 1).
    pub subsample_fraction: f64,
    /// Frequency needed to call an edge stable, in (0.5, 1].
    pub pi_threshold: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl StabilityConfig {
    pub fn new(lambda_grid: Vec<f64>, seed: u64) -> StabilityConfig {
        StabilityConfig {
            lambda_grid,
            n_subsamples: 100,
            subsample_fraction: 0.5,
            pi_threshold: 0.8,
            seed,
            solver: SolverConfig::default(),
        }
    }

    fn validate(&self, ds: &MultiTaskDataset) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Invalid("lambda grid is empty".into()));
        }
        for pair in self.lambda_grid.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Invalid("lambda grid must be strictly ascending".into()));
            }
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Invalid("lambda grid entries must be positive".into()));
        }
        if self.n_subsamples == 0 {
            return Err(Error::Invalid("need at least one subsample".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction < 1.0) {
            return Err(Error::Invalid(format!(
                "subsample fraction must lie in (0, 1), got {}",
                self.subsample_fraction
            )));
        }
        if !(self.pi_threshold > 0.5 && self.pi_threshold <= 1.0) {
            return Err(Error::Invalid(format!(
                "stability threshold must lie in (0.5, 1], got {}",
                self.pi_threshold
            )));
        }
        let min_rows = ds.tasks.iter().map(TaskData::num_rows).min().unwrap_or(0);
        if ((min_rows as f64) * self.subsample_fraction).floor() < 1.0 {
            return Err(Error::Invalid(
                "subsample fraction leaves some task with no rows".into(),
            ));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub task_ids: Vec<String>,
    /// All candidate pairs (a, b), a < b, in task order.
    pub pairs: Vec<(usize, usize)>,
    pub lambda_grid: Vec<f64>,
    /// frequencies[g][e]: fraction of successful subsample fits at
    /// lambda_grid[g] that selected pairs[e].
    pub frequencies: Vec<Vec<f64>>,
    /// Per pair, the largest frequency over the grid.
    pub max_frequency: Vec<f64>,
    pub stable_edges: Vec<(usize, usize)>,
    /// Expected-false-edge bound per grid point: q̄² / ((2π−1)·|pairs|).
    pub false_edge_bound: Vec<f64>,
    /// Smallest grid value whose bound stays ≤ 1, if any.
    pub chosen_lambda: Option<f64>,
    pub failed_fits: usize,
    pub total_fits: usize,
}

impl StabilityReport {
    /// Edges whose best frequency over the grid reaches `pi`.
    pub fn stable_set(&self, pi: f64) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .zip(&self.max_frequency)
            .filter(|(_, f)| **f >= pi)
            .map(|(e, _)| *e)
            .collect()
    }
}

fn subsample_dataset(
    ds: &MultiTaskDataset,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MultiTaskDataset> {
    let tasks = ds
        .tasks
        .iter()
        .map(|task| {
            let n = task.num_rows();
            let m = ((n as f64) * fraction).floor() as usize;
            let mut rows = rand::seq::index::sample(rng, n, m).into_vec();
            rows.sort_unstable();
            TaskData {
                id: task.id.clone(),
                x: DMatrix::from_fn(m, task.x.ncols(), |i, j| task.x[(rows[i], j)]),
                y: DVector::from_fn(m, |i, _| task.y[rows[i]]),
            }
        })
        .collect();
    MultiTaskDataset::new(ds.loss, tasks)
}

/// Repeatedly refit on row subsamples and keep the edges that survive across
/// them. Each subsample walks the grid from the largest penalty down, warm
/// starting each fit from the previous one. Aborts when more than 20% of all
/// fits fail.
pub fn stability_selection(
    ds: &MultiTaskDataset,
    variant: Variant,
    gamma: f64,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    ds.validate()?;
    cfg.validate(ds)?;
    if variant == Variant::FixedStructure {
        return Err(Error::Invalid(
            "stability selection searches over structure; the fixed-structure variant has none"
                .into(),
        ));
    }
    let k = ds.num_tasks();
    let grid_len = cfg.lambda_grid.len();

    // per subsample, per grid point: the selected pair set, or None on failure
    type Run = (Vec<Option<Vec<(usize, usize)>>>, Option<String>);
    let runs: Vec<Run> = (0..cfg.n_subsamples)
        .into_par_iter()
        .map(|i| -> Result<Run> {
            let seed = cfg
                .seed
                .wrapping_add((i as u64).wrapping_mul(SUBSAMPLE_SEED_STRIDE));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sub = subsample_dataset(ds, cfg.subsample_fraction, &mut rng)?;
            let mut per_grid = vec![None; grid_len];
            let mut last_error = None;
            let mut warm = None;
            for g in (0..grid_len).rev() {
                match fit_joint(variant, &sub, cfg.lambda_grid[g], gamma, &cfg.solver, warm.as_ref())
                {
                    Ok((model, next)) => {
                        per_grid[g] = Some(model.precision.support);
                        warm = Some(next);
                    }
                    Err(e) => last_error = Some(e.to_string()),
                }
            }
            Ok((per_grid, last_error))
        })
        .collect::<Result<Vec<_>>>()?;

    let total_fits = cfg.n_subsamples * grid_len;
    let failed_fits = runs
        .iter()
        .flat_map(|(r, _)| r.iter())
        .filter(|s| s.is_none())
        .count();
    if (failed_fits as f64) > MAX_FAILURE_FRACTION * (total_fits as f64) {
        let sample = runs
            .iter()
            .find_map(|(_, e)| e.clone())
            .unwrap_or_default();
        return Err(Error::SelectionAborted(format!(
            "{failed_fits} of {total_fits} fits failed; last error: {sample}"
        )));
    }
    let runs: Vec<Vec<Option<Vec<(usize, usize)>>>> =
        runs.into_iter().map(|(r, _)| r).collect();

    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            pairs.push((a, b));
        }
    }
    let pair_index = |a: usize, b: usize| a * (2 * k - a - 1) / 2 + (b - a - 1);

    let mut frequencies = vec![vec![0.0; pairs.len()]; grid_len];
    let mut false_edge_bound = vec![f64::INFINITY; grid_len];
    for g in 0..grid_len {
        let mut successes = 0usize;
        let mut counts = vec![0usize; pairs.len()];
        let mut support_sum = 0usize;
        for run in &runs {
            if let Some(support) = &run[g] {
                successes += 1;
                support_sum += support.len();
                for &(a, b) in support {
                    counts[pair_index(a, b)] += 1;
                }
            }
        }
        if successes > 0 {
            for (f, c) in frequencies[g].iter_mut().zip(&counts) {
                *f = *c as f64 / successes as f64;
            }
            let q_bar = support_sum as f64 / successes as f64;
            if !pairs.is_empty() {
                false_edge_bound[g] =
                    q_bar * q_bar / ((2.0 * cfg.pi_threshold - 1.0) * pairs.len() as f64);
            }
        }
    }

    let max_frequency: Vec<f64> = (0..pairs.len())
        .map(|e| frequencies.iter().map(|g| g[e]).fold(0.0, f64::max))
        .collect();
    let chosen_lambda = (0..grid_len)
        .find(|&g| false_edge_bound[g] <= 1.0)
        .map(|g| cfg.lambda_grid[g]);

    let mut report = StabilityReport {
        task_ids: ds.tasks.iter().map(|t| t.id.clone()).collect(),
        pairs,
        lambda_grid: cfg.lambda_grid.clone(),
        frequencies,
        max_frequency,
        stable_edges: Vec::new(),
        false_edge_bound,
        chosen_lambda,
        failed_fits,
        total_fits,
    };
    report.stable_edges = report.stable_set(cfg.pi_threshold);
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct CvRow {
    pub lambda: f64,
    pub gamma: f64,
    pub mean_score: f64,
    /// Validation score per fold (mean across tasks).
    pub per_fold: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub best_lambda: f64,
    pub best_gamma: f64,
    pub folds: usize,
    pub rows: Vec<CvRow>,
}

/// Row indices per task per fold: one seeded shuffle per task, chunked
/// contiguously, remainder spread over the leading folds.
fn fold_assignments(
    ds: &MultiTaskDataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<usize>>>> {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::with_capacity(ds.num_tasks());
    for task in &ds.tasks {
        let n = task.num_rows();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let base = n / folds;
        let extra = n % folds;
        let mut chunks = Vec::with_capacity(folds);
        let mut start = 0;
        for f in 0..folds {
            let len = base + usize::from(f < extra);
            if len < 2 {
                return Err(Error::Invalid(format!(
                    "fold {f} of task {} would hold {len} row(s); need at least 2",
                    task.id
                )));
            }
            let mut chunk: Vec<usize> = idx[start..start + len].to_vec();
            chunk.sort_unstable();
            chunks.push(chunk);
            start += len;
        }
        all.push(chunks);
    }
    Ok(all)
}

fn rows_subset(task: &TaskData, rows: &[usize]) -> TaskData {
    TaskData {
        id: task.id.clone(),
        x: DMatrix::from_fn(rows.len(), task.x.ncols(), |i, j| task.x[(rows[i], j)]),
        y: DVector::from_fn(rows.len(), |i, _| task.y[rows[i]]),
    }
}

/// Later grid cells win ties, so equal scores resolve to the larger lambda,
/// then the larger gamma.
fn best_cell(rows: &[CvRow]) -> (f64, f64) {
    let mut best = (rows[0].lambda, rows[0].gamma);
    let mut best_score = rows[0].mean_score;
    for row in &rows[1..] {
        if row.mean_score <= best_score {
            best_score = row.mean_score;
            best = (row.lambda, row.gamma);
        }
    }
    best
}

/// Cross-validated grid search. The score per fold is the refit model's mean
/// validation score across tasks (RMSE for regression, 0/1 error rate for
/// classification); cells are averaged over folds.
pub fn cv_grid(
    ds: &MultiTaskDataset,
    variant: Variant,
    lambda_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<CvReport> {
    ds.validate()?;
    solver.validate()?;
    if variant == Variant::FixedStructure {
        return Err(Error::Invalid(
            "grid search over lambda needs a learned structure variant".into(),
        ));
    }
    if lambda_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::Invalid("grids must be non-empty".into()));
    }
    for grid in [lambda_grid, gamma_grid] {
        for pair in grid.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Invalid("grids must be strictly ascending".into()));
            }
        }
        if grid.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Invalid("grid entries must be ≥ 0".into()));
        }
    }
    if folds < 2 {
        return Err(Error::Invalid("need at least 2 folds".into()));
    }
    let assignments = fold_assignments(ds, folds, seed)?;

    // train/validation datasets per fold, shared across grid cells
    let mut splits = Vec::with_capacity(folds);
    for f in 0..folds {
        let mut train_tasks = Vec::with_capacity(ds.num_tasks());
        let mut val_tasks = Vec::with_capacity(ds.num_tasks());
        for (t, task) in ds.tasks.iter().enumerate() {
            let val_rows = &assignments[t][f];
            let train_rows: Vec<usize> = (0..task.num_rows())
                .filter(|r| !val_rows.contains(r))
                .collect();
            train_tasks.push(rows_subset(task, &train_rows));
            val_tasks.push(rows_subset(task, val_rows));
        }
        splits.push((
            MultiTaskDataset::new(ds.loss, train_tasks)?,
            MultiTaskDataset::new(ds.loss, val_tasks)?,
        ));
    }

    let mut cells = Vec::with_capacity(lambda_grid.len() * gamma_grid.len());
    for &lambda in lambda_grid {
        for &gamma in gamma_grid {
            cells.push((lambda, gamma));
        }
    }
    let rows: Vec<CvRow> = cells
        .into_par_iter()
        .map(|(lambda, gamma)| -> Result<CvRow> {
            let mut per_fold = Vec::with_capacity(folds);
            for (train, val) in &splits {
                let (model, _) = fit_joint(variant, train, lambda, gamma, solver, None)?;
                per_fold.push(evaluate(&model, val)?.mean);
            }
            let mean_score = per_fold.iter().sum::<f64>() / folds as f64;
            Ok(CvRow {
                lambda,
                gamma,
                mean_score,
                per_fold,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (best_lambda, best_gamma) = best_cell(&rows);
    Ok(CvReport {
        best_lambda,
        best_gamma,
        folds,
        rows,
    })
}
