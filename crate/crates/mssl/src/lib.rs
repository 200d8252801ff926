//! Multi-task sparse structure learning: joint estimation of per-task linear
//! models and a sparse precision matrix over the tasks themselves, so that
//! related tasks borrow statistical strength and the recovered graph shows
//! which tasks are related.
//!
//! The estimator alternates two convex subproblems: a proximal-gradient step
//! for the task weights under the current task graph, and an ADMM step for
//! the task precision under the current weights (or residuals). Baseline
//! fits, synthetic benchmark generators, stability-based penalty selection,
//! and dataset IO round out the library.

pub mod baselines;
pub mod data;
pub mod error;
pub mod estimator;
pub mod glasso;
pub mod losses;
pub mod model;
pub mod selection;
pub mod synthetic;
pub mod wstep;

pub use baselines::{
    average_predict, best_single_covariate, fit_fixed_structure, fit_independent, grid_laplacian,
    IndependentFit, LaplacianSpec,
};
pub use data::{
    load_dataset, parse_manifest_str, parse_task_csv, sanitize_file_stem, write_dataset,
    write_dataset_as, LossKind, Manifest, ManifestEntry, MultiTaskDataset, StandardizationStats,
    TaskData, TaskScaling,
};
pub use error::{Error, Result};
pub use estimator::{
    fit_p_mssl, fit_r_mssl, residual_matrix, total_objective, AdmmTuning, SolverConfig,
    WStepTuning,
};
pub use glasso::{admm_solve, AdmmConfig, AdmmSolution, AdmmState};
pub use model::{PrecisionMatrix, TrainedModel, Variant};
pub use selection::{
    cv_grid, stability_selection, CvReport, CvRow, StabilityConfig, StabilityReport,
};
pub use synthetic::{
    edge_metrics, error_rate, evaluate, generate_cluster_tasks, generate_spatial_tasks, rmse,
    ClusterSpec, EdgeMetrics, EvalReport, GeneratedData, GroundTruth, SpatialSpec,
};
pub use wstep::{fista_solve, soft_threshold, Backtracking, SmoothObjective, WStepConfig, WStepSolution};
