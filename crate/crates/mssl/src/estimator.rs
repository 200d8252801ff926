//! Joint estimation by alternating minimization: a weight step under a fixed
//! task coupling, then a precision step on the resulting scatter, repeated
//! until the joint objective settles.
//!
//! Tasks are reordered into a canonical id-sorted order before any arithmetic
//! and mapped back afterwards, so a permuted dataset yields bit-identical
//! per-task results. Both subproblem solvers are warm started; a precision
//! update that fails to improve its subproblem is refined and, as a last
//! resort, rejected, so the recorded objective trace never increases beyond
//! rounding.

use nalgebra::DMatrix;

use crate::data::{LossKind, MultiTaskDataset, StandardizationStats, TaskData};
use crate::error::{Error, Result};
use crate::glasso::{self, AdmmConfig, AdmmState};
use crate::model::{PrecisionMatrix, TrainedModel, Variant};
use crate::wstep::{
    fista_solve_problem, Backtracking, ParamCoupled, ResidualCoupled, SmoothObjective, WStepConfig,
};

/// Inner weight-step settings; the ℓ1 strength comes from the fit call.
#[derive(Debug, Clone)]
pub struct WStepTuning {
    pub max_iters: usize,
    pub tol: f64,
    pub kkt_tol: f64,
    pub backtracking: Backtracking,
}

impl Default for WStepTuning {
    fn default() -> Self {
        WStepTuning {
            max_iters: 1000,
            tol: 1e-9,
            kkt_tol: 1e-4,
            backtracking: Backtracking::default(),
        }
    }
}

/// Inner precision-step settings; the ℓ1 strength comes from the fit call.
#[derive(Debug, Clone)]
pub struct AdmmTuning {
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for AdmmTuning {
    fn default() -> Self {
        AdmmTuning {
            max_iters: 1000,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// ADMM penalty parameter for the precision step.
    pub rho: f64,
    /// Log-determinant coefficient; `None` picks K/2 for K tasks.
    pub logdet_coeff: Option<f64>,
    pub max_outer: usize,
    /// Relative change of the joint objective that stops the outer loop.
    pub outer_tol: f64,
    /// Append an unpenalized, uncoupled intercept row to the weights.
    pub intercept: bool,
    /// Standardize features (and center regression responses) per task
    /// before fitting; the scalings are stored in the model.
    pub standardize: bool,
    pub wstep: WStepTuning,
    pub admm: AdmmTuning,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            logdet_coeff: None,
            max_outer: 50,
            outer_tol: 1e-5,
            intercept: false,
            standardize: false,
            wstep: WStepTuning::default(),
            admm: AdmmTuning::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::Invalid(format!("rho must be > 0, got {}", self.rho)));
        }
        if let Some(c) = self.logdet_coeff {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Invalid(format!("logdet coefficient must be > 0, got {c}")));
            }
        }
        if self.max_outer == 0 {
            return Err(Error::Invalid("max_outer must be ≥ 1".into()));
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::Invalid(format!("outer_tol must be > 0, got {}", self.outer_tol)));
        }
        Ok(())
    }
}

/// Residual matrix E with e_k = y_k − X_k w_k as column k. Every task must
/// have the same number of rows.
pub fn residual_matrix(w: &DMatrix<f64>, ds: &MultiTaskDataset) -> Result<DMatrix<f64>> {
    if !ds.equal_rows() {
        return Err(Error::Shape(
            "residual matrix requires the same row count in every task".into(),
        ));
    }
    if w.nrows() != ds.num_covariates() || w.ncols() != ds.num_tasks() {
        return Err(Error::Shape(format!(
            "weights are {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            ds.num_covariates(),
            ds.num_tasks()
        )));
    }
    Ok(residuals_unchecked(ds, w))
}

fn residuals_unchecked(ds: &MultiTaskDataset, w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ds.tasks[0].num_rows();
    let mut e = DMatrix::zeros(n, ds.num_tasks());
    for (k, task) in ds.tasks.iter().enumerate() {
        let pred = &task.x * w.column(k);
        e.column_mut(k).copy_from(&(&task.y - pred));
    }
    e
}

/// Joint objective of a fitted model on a dataset: per-task losses, the
/// variant's coupling trace, both ℓ1 terms, and the log-determinant barrier
/// (the latter two skipped for a fixed coupling, which is not estimated).
/// The dataset is matched to the model by task id and run through the
/// model's stored scalings first.
pub fn total_objective(model: &TrainedModel, ds: &MultiTaskDataset) -> Result<f64> {
    model.validate()?;
    if ds.loss != model.loss {
        return Err(Error::Invalid("dataset loss does not match the model".into()));
    }
    let prepared = prepare_for_model(model, ds)?;
    joint_value(
        model.variant,
        &prepared,
        &model.weights,
        model.num_covariates,
        &model.precision.omega,
        model.lambda,
        model.gamma,
        model.logdet_coeff,
    )
}

fn prepare_for_model(model: &TrainedModel, ds: &MultiTaskDataset) -> Result<MultiTaskDataset> {
    let mut tasks = Vec::with_capacity(model.task_ids.len());
    for (k, id) in model.task_ids.iter().enumerate() {
        let task = ds
            .tasks
            .iter()
            .find(|t| &t.id == id)
            .ok_or_else(|| Error::Invalid(format!("dataset has no task '{id}'")))?;
        if task.num_covariates() != model.num_covariates {
            return Err(Error::Shape(format!(
                "task '{id}' has {} covariates, model expects {}",
                task.num_covariates(),
                model.num_covariates
            )));
        }
        let (x, y) = match &model.standardization {
            Some(stats) => {
                let scaling = &stats.per_task[k];
                let x = scaling.transform_features(&task.x)?;
                let y = match model.loss {
                    LossKind::Squared => task.y.map(|v| v - scaling.response_mean),
                    LossKind::Logistic => task.y.clone(),
                };
                (x, y)
            }
            None => (task.x.clone(), task.y.clone()),
        };
        let x = if model.intercept { append_ones(&x) } else { x };
        tasks.push(TaskData {
            id: id.clone(),
            x,
            y,
        });
    }
    Ok(MultiTaskDataset {
        loss: ds.loss,
        tasks,
    })
}

fn append_ones(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols() + 1);
    out.view_mut((0, 0), (x.nrows(), x.ncols())).copy_from(x);
    out.column_mut(x.ncols()).fill(1.0);
    out
}

fn joint_value(
    variant: Variant,
    prepared: &MultiTaskDataset,
    w: &DMatrix<f64>,
    coupled_rows: usize,
    omega: &DMatrix<f64>,
    lambda: f64,
    gamma: f64,
    c: f64,
) -> Result<f64> {
    let mut total = match variant {
        Variant::PMssl | Variant::FixedStructure => {
            ParamCoupled::new(prepared, omega, coupled_rows, None)?.value(w)?
        }
        Variant::RMssl => ResidualCoupled::new(prepared, omega, None)?.value(w)?,
    };
    total += gamma * w.rows(0, coupled_rows).iter().map(|v| v.abs()).sum::<f64>();
    if variant != Variant::FixedStructure {
        let zero_scatter = DMatrix::zeros(omega.nrows(), omega.ncols());
        total += glasso::subproblem_value(&zero_scatter, omega, lambda, c)?;
    }
    Ok(total)
}

/// Warm-start bundle for refitting on related problems (canonical task
/// order, intercept row included when configured).
#[derive(Debug, Clone)]
pub(crate) struct JointWarm {
    pub weights: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub support: Vec<(usize, usize)>,
    pub state: Option<AdmmState>,
}

pub fn fit_p_mssl(
    ds: &MultiTaskDataset,
    lambda: f64,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<TrainedModel> {
    fit_joint(Variant::PMssl, ds, lambda, gamma, cfg, None).map(|(m, _)| m)
}

pub fn fit_r_mssl(
    ds: &MultiTaskDataset,
    lambda: f64,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<TrainedModel> {
    fit_joint(Variant::RMssl, ds, lambda, gamma, cfg, None).map(|(m, _)| m)
}

pub(crate) fn fit_joint(
    variant: Variant,
    ds: &MultiTaskDataset,
    lambda: f64,
    gamma: f64,
    cfg: &SolverConfig,
    warm: Option<&JointWarm>,
) -> Result<(TrainedModel, JointWarm)> {
    ds.validate()?;
    cfg.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Invalid(format!("lambda must be ≥ 0, got {lambda}")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Invalid(format!("gamma must be ≥ 0, got {gamma}")));
    }
    match variant {
        Variant::PMssl => {}
        Variant::RMssl => {
            if ds.loss != LossKind::Squared {
                return Err(Error::Invalid(
                    "residual coupling is defined for the squared loss only".into(),
                ));
            }
            if !ds.equal_rows() {
                return Err(Error::Shape(
                    "residual coupling requires the same row count in every task".into(),
                ));
            }
        }
        Variant::FixedStructure => {
            return Err(Error::Invalid(
                "fixed-structure fitting has its own entry point".into(),
            ));
        }
    }

    let k = ds.num_tasks();
    let c = cfg.logdet_coeff.unwrap_or(k as f64 / 2.0);

    // canonical order: everything numeric happens in id-sorted task order
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| ds.tasks[a].id.cmp(&ds.tasks[b].id));
    let reordered = MultiTaskDataset {
        loss: ds.loss,
        tasks: order.iter().map(|&i| ds.tasks[i].clone()).collect(),
    };

    let (prepared, stats) = if cfg.standardize {
        let (s, st) = reordered.standardize();
        (s, Some(st))
    } else {
        (reordered, None)
    };
    let d = ds.num_covariates();
    let prepared = if cfg.intercept {
        MultiTaskDataset {
            loss: prepared.loss,
            tasks: prepared
                .tasks
                .into_iter()
                .map(|t| TaskData {
                    id: t.id,
                    x: append_ones(&t.x),
                    y: t.y,
                })
                .collect(),
        }
    } else {
        prepared
    };
    let rows = d + usize::from(cfg.intercept);

    let (mut w, mut omega, mut support, mut admm_state) = match warm {
        Some(init) => {
            if init.weights.nrows() != rows
                || init.weights.ncols() != k
                || init.omega.nrows() != k
                || init.omega.ncols() != k
            {
                return Err(Error::Shape("warm start does not match the problem size".into()));
            }
            (
                init.weights.clone(),
                init.omega.clone(),
                init.support.clone(),
                init.state.clone(),
            )
        }
        None => (
            DMatrix::zeros(rows, k),
            DMatrix::identity(k, k),
            Vec::new(),
            None,
        ),
    };

    let wcfg = WStepConfig {
        gamma,
        max_iters: cfg.wstep.max_iters,
        tol: cfg.wstep.tol,
        kkt_tol: cfg.wstep.kkt_tol,
        backtracking: cfg.wstep.backtracking.clone(),
    };
    let acfg = AdmmConfig {
        lambda,
        rho: cfg.rho,
        logdet_coeff: c,
        max_iters: cfg.admm.max_iters,
        eps_abs: cfg.admm.eps_abs,
        eps_rel: cfg.admm.eps_rel,
    };

    let mut trace = vec![joint_value(variant, &prepared, &w, d, &omega, lambda, gamma, c)?];
    let mut outer_converged = false;
    let mut wstep_ok = true;
    let mut admm_ok = true;

    for outer in 1..=cfg.max_outer {
        let sol = match variant {
            Variant::PMssl => {
                let problem = ParamCoupled::new(&prepared, &omega, d, None)?;
                fista_solve_problem(&problem, &wcfg, d, Some(&w))?
            }
            Variant::RMssl => {
                let problem = ResidualCoupled::new(&prepared, &omega, None)?;
                fista_solve_problem(&problem, &wcfg, d, Some(&w))?
            }
            Variant::FixedStructure => unreachable!(),
        };
        w = sol.weights;
        wstep_ok = sol.converged;

        let coupled = match variant {
            Variant::PMssl => w.rows(0, d).into_owned(),
            Variant::RMssl => residuals_unchecked(&prepared, &w),
            Variant::FixedStructure => unreachable!(),
        };
        let s_mat = glasso::scatter(&coupled);

        if k == 1 {
            // one task: the penalized subproblem has the closed form c/(s+λ)
            omega = DMatrix::from_element(1, 1, c / (s_mat[(0, 0)] + lambda));
            support = Vec::new();
            admm_state = Some(AdmmState {
                z: omega.clone(),
                u: DMatrix::zeros(1, 1),
            });
            admm_ok = true;
        } else {
            let h_prev = glasso::subproblem_value(&s_mat, &omega, lambda, c)?;
            let allowance = 1e-12 * (1.0 + h_prev.abs());
            let mut sol_o = glasso::admm_solve(&s_mat, &acfg, admm_state.as_ref())?;
            let mut h_new = glasso::subproblem_value(&s_mat, &sol_o.precision, lambda, c)?;
            let mut refine = acfg.clone();
            for _ in 0..2 {
                if h_new <= h_prev + allowance {
                    break;
                }
                refine.eps_abs *= 1e-2;
                refine.eps_rel *= 1e-2;
                refine.max_iters *= 4;
                sol_o = glasso::admm_solve(&s_mat, &refine, Some(&sol_o.state))?;
                h_new = glasso::subproblem_value(&s_mat, &sol_o.precision, lambda, c)?;
            }
            if h_new <= h_prev + allowance {
                omega = sol_o.precision;
                support = sol_o.support;
                admm_ok = sol_o.converged;
                admm_state = Some(sol_o.state);
            }
            // otherwise keep the previous precision; the trace must not rise
        }

        let obj = joint_value(variant, &prepared, &w, d, &omega, lambda, gamma, c)?;
        if !obj.is_finite() {
            return Err(Error::Diverged {
                iteration: outer,
                message: "joint objective became non-finite".into(),
            });
        }
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() <= cfg.outer_tol * prev.abs().max(1.0) {
            outer_converged = true;
            break;
        }
    }

    let warm_out = JointWarm {
        weights: w.clone(),
        omega: omega.clone(),
        support: support.clone(),
        state: admm_state,
    };

    // map canonical-order results back to the dataset's task order
    let mut weights_out = DMatrix::zeros(rows, k);
    let mut omega_out = DMatrix::zeros(k, k);
    for p in 0..k {
        weights_out.set_column(order[p], &w.column(p));
        for q in 0..k {
            omega_out[(order[p], order[q])] = omega[(p, q)];
        }
    }
    let mut support_out: Vec<(usize, usize)> = support
        .iter()
        .map(|&(p, q)| {
            let (a, b) = (order[p], order[q]);
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    support_out.sort_unstable();
    let stats_out = stats.map(|s| {
        let mut per_task = vec![None; k];
        for (p, scaling) in s.per_task.into_iter().enumerate() {
            per_task[order[p]] = Some(scaling);
        }
        StandardizationStats {
            per_task: per_task.into_iter().map(|s| s.unwrap()).collect(),
        }
    });

    let model = TrainedModel {
        variant,
        loss: ds.loss,
        task_ids: ds.tasks.iter().map(|t| t.id.clone()).collect(),
        num_covariates: d,
        intercept: cfg.intercept,
        lambda,
        gamma,
        logdet_coeff: c,
        weights: weights_out,
        precision: PrecisionMatrix {
            omega: omega_out,
            support: support_out,
        },
        standardization: stats_out,
        objective_trace: trace,
        converged: outer_converged && wstep_ok && admm_ok,
    };
    Ok((model, warm_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TaskData;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn two_task_dataset() -> MultiTaskDataset {
        let x1 = DMatrix::from_row_slice(5, 2, &[
            0.5, -1.0, 1.2, 0.4, -0.9, 0.8, 0.2, -0.3, 1.0, 0.6,
        ]);
        let x2 = DMatrix::from_row_slice(5, 2, &[
            -0.2, 0.9, 0.7, -0.5, 1.3, 0.2, -0.6, 1.0, 0.3, -1.1,
        ]);
        let w_true = DVector::from_vec(vec![1.0, -0.5]);
        let y1 = &x1 * &w_true;
        let y2 = &x2 * &w_true;
        MultiTaskDataset::new(
            LossKind::Squared,
            vec![
                TaskData { id: "a".into(), x: x1, y: y1 },
                TaskData { id: "b".into(), x: x2, y: y2 },
            ],
        )
        .unwrap()
    }

    /// Longer tasks with exact linear responses; enough rows that the
    /// graph-coupling penalty barely biases the loss minimizer.
    fn long_two_task_dataset(n: usize) -> MultiTaskDataset {
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 4.0
        };
        let w_true = DVector::from_vec(vec![1.0, -0.5]);
        let mut tasks = Vec::new();
        for id in ["a", "b"] {
            let x = DMatrix::from_fn(n, 2, |_, _| next());
            let y = &x * &w_true;
            tasks.push(TaskData {
                id: id.into(),
                x,
                y,
            });
        }
        MultiTaskDataset::new(LossKind::Squared, tasks).unwrap()
    }

    #[test]
    fn objective_at_initialization_is_loss_plus_identity_penalty() {
        let ds = two_task_dataset();
        let k = ds.num_tasks();
        let model = TrainedModel {
            variant: Variant::PMssl,
            loss: LossKind::Squared,
            task_ids: vec!["a".into(), "b".into()],
            num_covariates: 2,
            intercept: false,
            lambda: 0.3,
            gamma: 0.7,
            logdet_coeff: k as f64 / 2.0,
            weights: DMatrix::zeros(2, 2),
            precision: PrecisionMatrix::identity(2),
            standardization: None,
            objective_trace: vec![],
            converged: false,
        };
        let expect: f64 = ds
            .tasks
            .iter()
            .map(|t| 0.5 * t.y.norm_squared())
            .sum::<f64>()
            + 0.3 * 2.0;
        let got = total_objective(&model, &ds).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn residual_matrix_hand_case_and_row_check() {
        let ds = two_task_dataset();
        let w = DMatrix::zeros(2, 2);
        let e = residual_matrix(&w, &ds).unwrap();
        assert_eq!(e.nrows(), 5);
        for k in 0..2 {
            for i in 0..5 {
                assert_eq!(e[(i, k)], ds.tasks[k].y[i]);
            }
        }

        let mut uneven = ds.clone();
        uneven.tasks[1].x = uneven.tasks[1].x.clone().remove_row(4);
        uneven.tasks[1].y = uneven.tasks[1].y.clone().remove_row(4);
        assert!(residual_matrix(&w, &uneven).is_err());
    }

    #[test]
    fn p_mssl_fit_recovers_shared_signal_and_descends() {
        let ds = long_two_task_dataset(40);
        let model = fit_p_mssl(&ds, 0.05, 0.01, &SolverConfig::default()).unwrap();
        assert!(model.converged);
        for pair in model.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-8);
        }
        for k in 0..2 {
            assert!((model.weights[(0, k)] - 1.0).abs() < 0.1);
            assert!((model.weights[(1, k)] + 0.5).abs() < 0.1);
        }
        assert_eq!(model.logdet_coeff, 1.0);
        assert!(model.precision.omega.clone().cholesky().is_some());
    }

    #[test]
    fn single_task_precision_has_closed_form() {
        let ds = MultiTaskDataset::new(
            LossKind::Squared,
            vec![two_task_dataset().tasks[0].clone()],
        )
        .unwrap();
        let lambda = 0.2;
        let model = fit_p_mssl(&ds, lambda, 0.0, &SolverConfig::default()).unwrap();
        let w = model.weights.column(0).into_owned();
        let s = w.norm_squared();
        assert_eq!(model.precision.omega[(0, 0)], model.logdet_coeff / (s + lambda));
    }

    #[test]
    fn permuted_tasks_give_bitwise_identical_results() {
        let ds = two_task_dataset();
        let swapped = MultiTaskDataset::new(
            LossKind::Squared,
            vec![ds.tasks[1].clone(), ds.tasks[0].clone()],
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let m1 = fit_p_mssl(&ds, 0.1, 0.05, &cfg).unwrap();
        let m2 = fit_p_mssl(&swapped, 0.1, 0.05, &cfg).unwrap();
        for (k1, id) in m1.task_ids.iter().enumerate() {
            let k2 = m2.task_index(id).unwrap();
            assert_eq!(m1.weights.column(k1), m2.weights.column(k2));
            for (j1, jd) in m1.task_ids.iter().enumerate() {
                let j2 = m2.task_index(jd).unwrap();
                assert_eq!(m1.precision.omega[(k1, j1)], m2.precision.omega[(k2, j2)]);
            }
        }
        assert_eq!(m1.objective_trace, m2.objective_trace);
    }

    #[test]
    fn r_mssl_requires_equal_rows_and_squared_loss() {
        let mut ds = two_task_dataset();
        let model = fit_r_mssl(&ds, 0.1, 0.01, &SolverConfig::default()).unwrap();
        assert!(model.converged);
        for pair in model.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-8);
        }

        ds.tasks[0].x = ds.tasks[0].x.clone().remove_row(0);
        ds.tasks[0].y = ds.tasks[0].y.clone().remove_row(0);
        assert!(fit_r_mssl(&ds, 0.1, 0.01, &SolverConfig::default()).is_err());

        let labels = MultiTaskDataset::new(
            LossKind::Logistic,
            vec![TaskData {
                id: "a".into(),
                x: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
                y: DVector::from_vec(vec![1.0, 0.0]),
            }],
        )
        .unwrap();
        assert!(fit_r_mssl(&labels, 0.1, 0.01, &SolverConfig::default()).is_err());
    }

    #[test]
    fn intercept_and_standardization_recorded_in_model() {
        let mut ds = long_two_task_dataset(40);
        for task in &mut ds.tasks {
            task.y.add_scalar_mut(7.5);
        }
        let cfg = SolverConfig {
            intercept: true,
            standardize: true,
            ..Default::default()
        };
        let model = fit_p_mssl(&ds, 0.1, 0.01, &cfg).unwrap();
        assert!(model.intercept);
        assert_eq!(model.weights.nrows(), 3);
        let stats = model.standardization.as_ref().unwrap();
        assert_abs_diff_eq!(
            stats.per_task[0].response_mean,
            ds.tasks[0].y.sum() / 40.0,
            epsilon = 1e-12
        );
        // prediction undoes the scaling: near-perfect on the training data
        let pred = model.predict("a", &ds.tasks[0].x).unwrap();
        let err = (&pred - &ds.tasks[0].y).amax();
        assert!(err < 0.2, "max train error {err}");
    }

    #[test]
    fn stronger_gamma_sparsifies_weights() {
        let ds = two_task_dataset();
        let sparse = fit_p_mssl(&ds, 0.1, 5.0, &SolverConfig::default()).unwrap();
        let zeros = sparse.weights.iter().filter(|v| **v == 0.0).count();
        assert!(zeros >= 1);
        let dense = fit_p_mssl(&ds, 0.1, 0.0, &SolverConfig::default()).unwrap();
        let dense_zeros = dense.weights.iter().filter(|v| **v == 0.0).count();
        assert!(dense_zeros <= zeros);
    }

    #[test]
    fn invalid_penalties_rejected() {
        let ds = two_task_dataset();
        assert!(fit_p_mssl(&ds, -0.1, 0.0, &SolverConfig::default()).is_err());
        assert!(fit_p_mssl(&ds, 0.0, f64::NAN, &SolverConfig::default()).is_err());
        let bad = SolverConfig {
            logdet_coeff: Some(0.0),
            ..Default::default()
        };
        assert!(fit_p_mssl(&ds, 0.1, 0.1, &bad).is_err());
    }
}
