//! Subcommand implementations and their argument structs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use mssl::{
    cv_grid, evaluate as evaluate_model, fit_fixed_structure, fit_independent, fit_p_mssl,
    fit_r_mssl, generate_cluster_tasks, generate_spatial_tasks, grid_laplacian, load_dataset,
    rmse, sanitize_file_stem, stability_selection, write_dataset_as, AdmmTuning, ClusterSpec,
    Error, LaplacianSpec, LossKind, MultiTaskDataset, PrecisionMatrix, Result, SolverConfig,
    SpatialSpec, StabilityConfig, TrainedModel, Variant, WStepTuning,
};

use crate::{EXIT_NOT_CONVERGED, EXIT_OK};

/// Which estimator a fit-like command runs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    /// Couple task weight vectors through the precision matrix
    #[value(name = "p-mssl")]
    PMssl,
    /// Couple task residual vectors through the precision matrix
    #[value(name = "r-mssl")]
    RMssl,
    /// Keep a caller-supplied graph Laplacian as the coupling
    #[value(name = "fixed-structure")]
    FixedStructure,
}

impl VariantArg {
    fn to_variant(self) -> Variant {
        match self {
            VariantArg::PMssl => Variant::PMssl,
            VariantArg::RMssl => Variant::RMssl,
            VariantArg::FixedStructure => Variant::FixedStructure,
        }
    }

    fn name(self) -> &'static str {
        match self {
            VariantArg::PMssl => "p-mssl",
            VariantArg::RMssl => "r-mssl",
            VariantArg::FixedStructure => "fixed-structure",
        }
    }
}

/// Solver knobs shared by `train` and `select`. Defaults mirror the library.
#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    /// Augmented-Lagrangian penalty for the precision update
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Log-determinant coefficient; defaults to half the task count
    #[arg(long)]
    pub logdet_coeff: Option<f64>,
    /// Cap on outer alternations
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    /// Relative objective change that stops the outer loop
    #[arg(long, default_value_t = 1e-5)]
    pub outer_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub wstep_max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub wstep_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub wstep_kkt_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub admm_max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub admm_eps_abs: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub admm_eps_rel: f64,
    /// Fit an unpenalized, uncoupled intercept per task
    #[arg(long)]
    pub intercept: bool,
    /// Standardize covariates (and center responses) per task
    #[arg(long)]
    pub standardize: bool,
}

impl SolverFlags {
    fn to_config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            logdet_coeff: self.logdet_coeff,
            max_outer: self.max_outer,
            outer_tol: self.outer_tol,
            intercept: self.intercept,
            standardize: self.standardize,
            wstep: WStepTuning {
                max_iters: self.wstep_max_iters,
                tol: self.wstep_tol,
                kkt_tol: self.wstep_kkt_tol,
                ..WStepTuning::default()
            },
            admm: AdmmTuning {
                max_iters: self.admm_max_iters,
                eps_abs: self.admm_eps_abs,
                eps_rel: self.admm_eps_rel,
            },
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

/// Render rows as CSV. Shortest round-trip float formatting keeps repeated
/// runs byte-identical.
fn csv_text(rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row)
            .map_err(|e| Error::Invalid(format!("csv write failed: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Invalid(format!("csv write failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(format!("csv not utf-8: {e}")))
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &csv_text(rows)?)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------- generate

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(subcommand)]
    pub family: GenerateFamily,
}

#[derive(Subcommand, Debug)]
pub enum GenerateFamily {
    /// Tasks drawn around shared cluster centers plus unrelated singletons
    Cluster(ClusterArgs),
    /// Tasks on a grid with spatially correlated residuals
    Spatial(SpatialArgs),
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Directory for the manifests, task tables, and truth.json
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 13)]
    pub tasks: usize,
    #[arg(long, default_value_t = 30)]
    pub covariates: usize,
    /// Rows drawn per task, train and test together
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    #[arg(long, default_value_t = 60)]
    pub train_rows: usize,
    /// Cluster memberships over task indices, e.g. "0-3;4-9" or "0,2;1,3"
    #[arg(long, default_value = "0-3;4-9")]
    pub clusters: String,
    #[arg(long, default_value_t = 1.0)]
    pub center_scale: f64,
    /// Within-cluster deviation around each center
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    /// Weight scale for tasks outside every cluster
    #[arg(long, default_value_t = 1.0)]
    pub singleton_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    /// Draw a fresh design per task instead of one shared design
    #[arg(long)]
    pub per_task_design: bool,
}

#[derive(Args, Debug)]
pub struct SpatialArgs {
    /// Directory for the manifests, task tables, and truth.json
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub grid_rows: usize,
    #[arg(long, default_value_t = 6)]
    pub grid_cols: usize,
    #[arg(long, default_value_t = 10)]
    pub covariates: usize,
    /// Rows drawn per task, train and test together
    #[arg(long, default_value_t = 80)]
    pub rows: usize,
    #[arg(long, default_value_t = 40)]
    pub train_rows: usize,
    /// Residual coupling strength along grid edges
    #[arg(long, default_value_t = 4.0)]
    pub kappa: f64,
    /// Residual precision at zero coupling
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub weight_scale: f64,
}

/// Parse cluster groups: `;` separates groups, members are indices or
/// inclusive ranges (`4-9`), optionally comma-separated within a group.
fn parse_clusters(text: &str) -> Result<Vec<Vec<usize>>> {
    let bad = |piece: &str| Error::Invalid(format!("cannot parse cluster member '{piece}'"));
    let mut groups = Vec::new();
    for group in text.split(';') {
        let group = group.trim();
        if group.is_empty() {
            continue;
        }
        let mut members = Vec::new();
        for piece in group.split(',') {
            let piece = piece.trim();
            if let Some((a, b)) = piece.split_once('-') {
                let a: usize = a.trim().parse().map_err(|_| bad(piece))?;
                let b: usize = b.trim().parse().map_err(|_| bad(piece))?;
                if b < a {
                    return Err(Error::Invalid(format!("range '{piece}' runs backwards")));
                }
                members.extend(a..=b);
            } else {
                members.push(piece.parse().map_err(|_| bad(piece))?);
            }
        }
        groups.push(members);
    }
    if groups.is_empty() {
        return Err(Error::Invalid("no cluster groups given".into()));
    }
    Ok(groups)
}

pub fn generate(args: &GenerateArgs) -> Result<i32> {
    let (data, out) = match &args.family {
        GenerateFamily::Cluster(a) => {
            let spec = ClusterSpec {
                num_tasks: a.tasks,
                num_covariates: a.covariates,
                n_total: a.rows,
                n_train: a.train_rows,
                clusters: parse_clusters(&a.clusters)?,
                center_scale: a.center_scale,
                within_cluster_spread: a.spread,
                singleton_scale: a.singleton_scale,
                noise_std: a.noise_std,
                shared_design: !a.per_task_design,
                seed: a.seed,
            };
            (generate_cluster_tasks(&spec)?, &a.out)
        }
        GenerateFamily::Spatial(a) => {
            let spec = SpatialSpec {
                grid_rows: a.grid_rows,
                grid_cols: a.grid_cols,
                num_covariates: a.covariates,
                n_total: a.rows,
                n_train: a.train_rows,
                kappa: a.kappa,
                tau: a.tau,
                weight_scale: a.weight_scale,
                seed: a.seed,
            };
            (generate_spatial_tasks(&spec)?, &a.out)
        }
    };
    ensure_dir(out)?;
    write_dataset_as(&data.train, out, "train_manifest.json")?;
    write_dataset_as(&data.test, out, "test_manifest.json")?;
    write_text(&out.join("truth.json"), &(data.truth.to_json_string()? + "\n"))?;
    let train_rows = data.train.tasks.first().map_or(0, |t| t.num_rows());
    let test_rows = data.test.tasks.first().map_or(0, |t| t.num_rows());
    println!(
        "wrote {} tasks ({} train / {} test rows each), {} true edges, under {}",
        data.train.tasks.len(),
        train_rows,
        test_rows,
        data.truth.edges.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

// ------------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Manifest of the training split
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    /// Sparsity penalty on the precision matrix (learned-structure variants)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// L1 penalty on the weights
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Directory for model.json and trace.csv
    #[arg(long)]
    pub out: PathBuf,
    /// Grid rows for a fixed-structure Laplacian
    #[arg(long)]
    pub grid_rows: Option<usize>,
    /// Grid columns for a fixed-structure Laplacian
    #[arg(long)]
    pub grid_cols: Option<usize>,
    /// Explicit fixed-structure edge list over task indices, e.g. "0-1;1-2"
    #[arg(long)]
    pub edges: Option<String>,
    /// Scale applied to the fixed Laplacian
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
}

fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for piece in text.split(';') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let (a, b) = piece
            .split_once('-')
            .ok_or_else(|| Error::Invalid(format!("edge '{piece}' must look like a-b")))?;
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("cannot parse edge endpoint in '{piece}'")))?;
        let b: usize = b
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("cannot parse edge endpoint in '{piece}'")))?;
        edges.push((a, b));
    }
    Ok(edges)
}

fn fit_fixed(args: &TrainArgs, ds: &MultiTaskDataset, cfg: &SolverConfig) -> Result<TrainedModel> {
    if args.lambda.is_some() {
        return Err(Error::Invalid(
            "--lambda has no effect when the structure is fixed".into(),
        ));
    }
    if cfg.intercept || cfg.standardize {
        return Err(Error::Invalid(
            "--intercept and --standardize are not supported with a fixed structure".into(),
        ));
    }
    let lap = match (&args.edges, args.grid_rows, args.grid_cols) {
        (Some(edges), None, None) => LaplacianSpec::from_edges(ds.num_tasks(), &parse_edges(edges)?)?,
        (None, Some(rows), Some(cols)) => grid_laplacian(rows, cols)?,
        _ => {
            return Err(Error::Invalid(
                "fixed structure needs either --edges or both --grid-rows and --grid-cols".into(),
            ))
        }
    };
    let sol = fit_fixed_structure(ds, &lap, args.multiplier, args.gamma)?;
    let k = ds.num_tasks();
    Ok(TrainedModel {
        variant: Variant::FixedStructure,
        loss: ds.loss,
        task_ids: ds.tasks.iter().map(|t| t.id.clone()).collect(),
        num_covariates: ds.num_covariates(),
        intercept: false,
        lambda: 0.0,
        gamma: args.gamma,
        logdet_coeff: k as f64 / 2.0,
        weights: sol.weights,
        precision: PrecisionMatrix {
            omega: &lap.matrix * args.multiplier,
            support: lap.edges,
        },
        standardization: None,
        objective_trace: sol.objective_trace,
        converged: sol.converged,
    })
}

pub fn train(args: &TrainArgs) -> Result<i32> {
    let ds = load_dataset(&args.manifest)?;
    let cfg = args.solver.to_config();
    let model = match args.variant {
        VariantArg::FixedStructure => fit_fixed(args, &ds, &cfg)?,
        learned => {
            if args.grid_rows.is_some() || args.grid_cols.is_some() || args.edges.is_some() {
                return Err(Error::Invalid(
                    "--grid-rows/--grid-cols/--edges apply only to the fixed-structure variant"
                        .into(),
                ));
            }
            let lambda = args.lambda.ok_or_else(|| {
                Error::Invalid("--lambda is required when the structure is learned".into())
            })?;
            match learned {
                VariantArg::PMssl => fit_p_mssl(&ds, lambda, args.gamma, &cfg)?,
                _ => fit_r_mssl(&ds, lambda, args.gamma, &cfg)?,
            }
        }
    };
    ensure_dir(&args.out)?;
    model.save(&args.out.join("model.json"))?;
    let mut trace = vec![vec!["iteration".to_string(), "objective".to_string()]];
    for (i, v) in model.objective_trace.iter().enumerate() {
        trace.push(vec![i.to_string(), fmt(*v)]);
    }
    write_csv(&args.out.join("trace.csv"), &trace)?;
    let final_obj = model.objective_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} on {} tasks; final objective {}; {} precision edges",
        args.variant.name(),
        model.task_ids.len(),
        fmt(final_obj),
        model.precision.support.len()
    );
    if model.converged {
        Ok(EXIT_OK)
    } else {
        println!("fit did not converge within iteration limits; artifacts written and flagged");
        Ok(EXIT_NOT_CONVERGED)
    }
}

// ----------------------------------------------------------------- predict

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Manifest of the rows to score
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for one pred_<task>.csv per task
    #[arg(long)]
    pub out: PathBuf,
}

/// Task-id file stems, deduplicated the same way dataset export does it.
fn unique_stems(ids: &[String]) -> Vec<String> {
    let mut used = BTreeSet::new();
    let mut stems = Vec::with_capacity(ids.len());
    for id in ids {
        let mut name = sanitize_file_stem(id);
        if !used.insert(name.clone()) {
            let mut i = 2;
            while !used.insert(format!("{name}_{i}")) {
                i += 1;
            }
            name = format!("{name}_{i}");
        }
        stems.push(name);
    }
    stems
}

pub fn predict(args: &PredictArgs) -> Result<i32> {
    let model = TrainedModel::load(&args.model)?;
    let ds = load_dataset(&args.manifest)?;
    if ds.loss != model.loss {
        return Err(Error::Invalid(
            "dataset loss does not match the model".into(),
        ));
    }
    ensure_dir(&args.out)?;
    let ids: Vec<String> = ds.tasks.iter().map(|t| t.id.clone()).collect();
    let stems = unique_stems(&ids);
    for (task, stem) in ds.tasks.iter().zip(&stems) {
        let scores = model.predict(&task.id, &task.x)?;
        let mut rows = Vec::with_capacity(scores.len() + 1);
        match model.loss {
            LossKind::Squared => {
                rows.push(vec!["prediction".to_string()]);
                for v in scores.iter() {
                    rows.push(vec![fmt(*v)]);
                }
            }
            LossKind::Logistic => {
                let labels = model.predict_labels(&task.id, &task.x)?;
                rows.push(vec!["probability".to_string(), "label".to_string()]);
                for (p, l) in scores.iter().zip(labels.iter()) {
                    rows.push(vec![fmt(*p), fmt(*l)]);
                }
            }
        }
        write_csv(&args.out.join(format!("pred_{stem}.csv")), &rows)?;
    }
    println!(
        "wrote predictions for {} tasks under {}",
        ds.tasks.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- evaluate

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Manifest of the labelled rows to score against
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for metrics.csv
    #[arg(long)]
    pub out: PathBuf,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<i32> {
    let model = TrainedModel::load(&args.model)?;
    let ds = load_dataset(&args.manifest)?;
    let report = evaluate_model(&model, &ds)?;
    let metric = match model.loss {
        LossKind::Squared => "rmse",
        LossKind::Logistic => "error_rate",
    };
    let mut rows = vec![vec!["task".to_string(), metric.to_string()]];
    for ts in &report.per_task {
        rows.push(vec![ts.id.clone(), fmt(ts.score)]);
    }
    // parenthesized pseudo-rows cannot collide with exported task stems
    rows.push(vec!["(mean)".to_string(), fmt(report.mean)]);
    rows.push(vec!["(std)".to_string(), fmt(report.std)]);
    ensure_dir(&args.out)?;
    write_csv(&args.out.join("metrics.csv"), &rows)?;
    println!("per-task {metric}:");
    for ts in &report.per_task {
        println!("  {:<16} {:.6}", ts.id, ts.score);
    }
    println!("  mean {:.6}, std {:.6}", report.mean, report.std);
    Ok(EXIT_OK)
}

// ------------------------------------------------------------------ select

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(subcommand)]
    pub method: SelectMethod,
}

#[derive(Subcommand, Debug)]
pub enum SelectMethod {
    /// Stable-edge frequencies over subsampled refits across a lambda grid
    Stability(StabilityArgs),
    /// K-fold cross-validation over a lambda x gamma grid
    Cv(CvArgs),
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "p-mssl")]
    pub variant: VariantArg,
    /// Ascending precision penalties to scan, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100)]
    pub subsamples: usize,
    /// Fraction of each task's rows drawn per subsample
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    /// Selection frequency needed to call an edge stable
    #[arg(long, default_value_t = 0.8)]
    pub pi: f64,
    #[arg(long)]
    pub seed: u64,
    /// Directory for frequencies.csv and stability.json
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "p-mssl")]
    pub variant: VariantArg,
    /// Ascending precision penalties, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda_grid: Vec<f64>,
    /// Ascending weight penalties, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub gamma_grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub seed: u64,
    /// Directory for cv_scores.csv, cv_folds.csv, and cv.json
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Serialize)]
struct EdgeIds {
    a: String,
    b: String,
}

#[derive(Serialize)]
struct StabilitySummary {
    pi_threshold: f64,
    stable_edges: Vec<EdgeIds>,
    /// Expected false-edge count per lambda; null when no fit succeeded
    false_edge_bound: Vec<Option<f64>>,
    chosen_lambda: Option<f64>,
    failed_fits: usize,
    total_fits: usize,
}

fn select_stability(a: &StabilityArgs) -> Result<i32> {
    let ds = load_dataset(&a.manifest)?;
    let cfg = StabilityConfig {
        lambda_grid: a.lambda_grid.clone(),
        n_subsamples: a.subsamples,
        subsample_fraction: a.fraction,
        pi_threshold: a.pi,
        seed: a.seed,
        solver: a.solver.to_config(),
    };
    let report = stability_selection(&ds, a.variant.to_variant(), a.gamma, &cfg)?;
    ensure_dir(&a.out)?;

    let mut rows = vec![vec![
        "lambda".to_string(),
        "task_a".to_string(),
        "task_b".to_string(),
        "frequency".to_string(),
    ]];
    for (g, lam) in report.lambda_grid.iter().enumerate() {
        for (p, &(i, j)) in report.pairs.iter().enumerate() {
            rows.push(vec![
                fmt(*lam),
                report.task_ids[i].clone(),
                report.task_ids[j].clone(),
                fmt(report.frequencies[g][p]),
            ]);
        }
    }
    write_csv(&a.out.join("frequencies.csv"), &rows)?;

    let summary = StabilitySummary {
        pi_threshold: cfg.pi_threshold,
        stable_edges: report
            .stable_edges
            .iter()
            .map(|&(i, j)| EdgeIds {
                a: report.task_ids[i].clone(),
                b: report.task_ids[j].clone(),
            })
            .collect(),
        false_edge_bound: report
            .false_edge_bound
            .iter()
            .map(|b| b.is_finite().then_some(*b))
            .collect(),
        chosen_lambda: report.chosen_lambda,
        failed_fits: report.failed_fits,
        total_fits: report.total_fits,
    };
    write_json(&a.out.join("stability.json"), &summary)?;

    println!(
        "stable edges at pi >= {}: {}",
        a.pi,
        report.stable_edges.len()
    );
    for &(i, j) in &report.stable_edges {
        println!("  {} -- {}", report.task_ids[i], report.task_ids[j]);
    }
    match report.chosen_lambda {
        Some(lam) => println!("suggested lambda: {lam}"),
        None => println!("no grid point met the false-edge bound"),
    }
    println!(
        "fit failures: {} of {}",
        report.failed_fits, report.total_fits
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CvSummary {
    best_lambda: f64,
    best_gamma: f64,
    folds: usize,
}

fn select_cv(a: &CvArgs) -> Result<i32> {
    let ds = load_dataset(&a.manifest)?;
    let report = cv_grid(
        &ds,
        a.variant.to_variant(),
        &a.lambda_grid,
        &a.gamma_grid,
        a.folds,
        a.seed,
        &a.solver.to_config(),
    )?;
    ensure_dir(&a.out)?;

    let mut scores = vec![vec![
        "lambda".to_string(),
        "gamma".to_string(),
        "mean_score".to_string(),
    ]];
    let mut folds = vec![vec![
        "lambda".to_string(),
        "gamma".to_string(),
        "fold".to_string(),
        "score".to_string(),
    ]];
    for row in &report.rows {
        scores.push(vec![fmt(row.lambda), fmt(row.gamma), fmt(row.mean_score)]);
        for (f, s) in row.per_fold.iter().enumerate() {
            folds.push(vec![fmt(row.lambda), fmt(row.gamma), f.to_string(), fmt(*s)]);
        }
    }
    write_csv(&a.out.join("cv_scores.csv"), &scores)?;
    write_csv(&a.out.join("cv_folds.csv"), &folds)?;
    write_json(
        &a.out.join("cv.json"),
        &CvSummary {
            best_lambda: report.best_lambda,
            best_gamma: report.best_gamma,
            folds: report.folds,
        },
    )?;

    let best = report
        .rows
        .iter()
        .find(|r| r.lambda == report.best_lambda && r.gamma == report.best_gamma);
    match best {
        Some(row) => println!(
            "best cell: lambda {}, gamma {} (mean validation score {:.6})",
            report.best_lambda, report.best_gamma, row.mean_score
        ),
        None => println!(
            "best cell: lambda {}, gamma {}",
            report.best_lambda, report.best_gamma
        ),
    }
    Ok(EXIT_OK)
}

pub fn select(args: &SelectArgs) -> Result<i32> {
    match &args.method {
        SelectMethod::Stability(a) => select_stability(a),
        SelectMethod::Cv(a) => select_cv(a),
    }
}

// -------------------------------------------------------- export-structure

#[derive(Args, Debug)]
pub struct ExportStructureArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory for edges.json and graph.dot
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct EdgeDoc {
    a: String,
    b: String,
    omega: f64,
    partial_corr: f64,
}

fn dot_quote(id: &str) -> String {
    format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn export_structure(args: &ExportStructureArgs) -> Result<i32> {
    let model = TrainedModel::load(&args.model)?;
    let edges: Vec<EdgeDoc> = model
        .precision
        .support
        .iter()
        .map(|&(i, j)| EdgeDoc {
            a: model.task_ids[i].clone(),
            b: model.task_ids[j].clone(),
            omega: model.precision.omega[(i, j)],
            partial_corr: model.precision.partial_correlation(i, j),
        })
        .collect();
    ensure_dir(&args.out)?;
    write_json(&args.out.join("edges.json"), &edges)?;

    let mut dot = String::from("graph tasks {\n");
    for id in &model.task_ids {
        let _ = writeln!(dot, "  {};", dot_quote(id));
    }
    for e in &edges {
        let _ = writeln!(
            dot,
            "  {} -- {} [weight={}];",
            dot_quote(&e.a),
            dot_quote(&e.b),
            fmt(e.partial_corr.abs())
        );
    }
    dot.push_str("}\n");
    write_text(&args.out.join("graph.dot"), &dot)?;
    println!(
        "exported {} edges over {} tasks under {}",
        edges.len(),
        model.task_ids.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

// ------------------------------------------------------------------- bench

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Run the built-in clustered benchmark
    #[arg(long, required = true)]
    pub paper_synthetic: bool,
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    /// Base seed; run i uses seed + i
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Precision penalty for the joint fits
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Weight penalty for the joint fits
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    /// Optional directory for bench_rmse.csv and bench_summary.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct RunScores {
    converged: bool,
    /// (task id, coupled with any other task, joint rmse, ols rmse)
    per_task: Vec<(String, bool, f64, f64)>,
}

fn bench_run(seed: u64, lambda: f64, gamma: f64) -> Result<RunScores> {
    let data = generate_cluster_tasks(&ClusterSpec::benchmark(seed))?;
    let joint = fit_p_mssl(&data.train, lambda, gamma, &SolverConfig::default())?;
    let ols = fit_independent(&data.train, 0.0)?;
    let coupled: BTreeSet<usize> = data
        .truth
        .edges
        .iter()
        .flat_map(|&(i, j)| [i, j])
        .collect();
    let mut per_task = Vec::with_capacity(data.test.tasks.len());
    for (k, task) in data.test.tasks.iter().enumerate() {
        let joint_pred = joint.predict(&task.id, &task.x)?;
        let ols_pred = &task.x * ols.weights.column(k);
        per_task.push((
            task.id.clone(),
            coupled.contains(&k),
            rmse(&joint_pred, &task.y)?,
            rmse(&ols_pred, &task.y)?,
        ));
    }
    Ok(RunScores {
        converged: joint.converged,
        per_task,
    })
}

pub fn bench(args: &BenchArgs) -> Result<i32> {
    if args.runs == 0 {
        return Err(Error::Invalid("need at least one run".into()));
    }
    let results = (0..args.runs)
        .into_par_iter()
        .map(|run| bench_run(args.seed.wrapping_add(run as u64), args.lambda, args.gamma))
        .collect::<Result<Vec<RunScores>>>()?;

    let tasks = results[0].per_task.len();
    let runs = args.runs as f64;
    let mut joint_mean = vec![0.0; tasks];
    let mut ols_mean = vec![0.0; tasks];
    for res in &results {
        for (k, (_, _, joint, ols)) in res.per_task.iter().enumerate() {
            joint_mean[k] += joint / runs;
            ols_mean[k] += ols / runs;
        }
    }

    // a run is a win when the mean rmse over coupled tasks beats least squares
    let coupled_mean = |scores: &RunScores, pick_joint: bool| {
        let picked: Vec<f64> = scores
            .per_task
            .iter()
            .filter(|t| t.1)
            .map(|t| if pick_joint { t.2 } else { t.3 })
            .collect();
        picked.iter().sum::<f64>() / picked.len().max(1) as f64
    };
    let wins = results
        .iter()
        .filter(|r| coupled_mean(r, true) < coupled_mean(r, false))
        .count();
    let unconverged = results.iter().filter(|r| !r.converged).count();

    if let Some(out) = &args.out {
        ensure_dir(out)?;
        let mut rows = vec![vec![
            "run".to_string(),
            "task".to_string(),
            "method".to_string(),
            "rmse".to_string(),
        ]];
        for (run, res) in results.iter().enumerate() {
            for (id, _, joint, ols) in &res.per_task {
                rows.push(vec![run.to_string(), id.clone(), "p-mssl".into(), fmt(*joint)]);
                rows.push(vec![run.to_string(), id.clone(), "ols".into(), fmt(*ols)]);
            }
        }
        write_csv(&out.join("bench_rmse.csv"), &rows)?;

        let mut summary = vec![vec![
            "task".to_string(),
            "p_mssl_mean_rmse".to_string(),
            "ols_mean_rmse".to_string(),
            "improvement_pct".to_string(),
        ]];
        for k in 0..tasks {
            let id = &results[0].per_task[k].0;
            let pct = 100.0 * (ols_mean[k] - joint_mean[k]) / ols_mean[k];
            summary.push(vec![id.clone(), fmt(joint_mean[k]), fmt(ols_mean[k]), fmt(pct)]);
        }
        write_csv(&out.join("bench_summary.csv"), &summary)?;
    }

    println!(
        "{} runs from seed {}, lambda {}, gamma {}",
        args.runs, args.seed, args.lambda, args.gamma
    );
    println!("{:<16} {:>10} {:>10} {:>8}", "task", "p-mssl", "ols", "gain");
    for k in 0..tasks {
        let (id, coupled, _, _) = &results[0].per_task[k];
        let pct = 100.0 * (ols_mean[k] - joint_mean[k]) / ols_mean[k];
        println!(
            "{:<16} {:>10.4} {:>10.4} {:>7.1}%{}",
            id,
            joint_mean[k],
            ols_mean[k],
            pct,
            if *coupled { "" } else { "  (singleton)" }
        );
    }
    println!(
        "joint estimator wins on coupled tasks in {wins} of {} runs; {unconverged} runs unconverged",
        args.runs
    );
    Ok(EXIT_OK)
}
