//! Accelerated proximal-gradient solver for the weight subproblem:
//! minimize Σ_k L_k(w_k) + tr(W Ω Wᵀ) + γ‖W‖₁ over W for a fixed coupling Ω.
//!
//! The same iteration also serves the residual-coupled variant, where the
//! trace term reads tr(E Ω Eᵀ) on the residual matrix E instead of W; both are
//! exposed through the [`SmoothObjective`] trait. Acceleration restarts
//! whenever a step would increase the objective, so the reported trace is
//! non-increasing.

use nalgebra::DMatrix;

use crate::data::{LossKind, MultiTaskDataset};
use crate::error::{Error, Result};
use crate::losses;

/// Step-size policy for [`fista_solve`].
#[derive(Debug, Clone)]
pub struct Backtracking {
    /// When false, the step is fixed to the inverse Lipschitz bound.
    pub enabled: bool,
    pub shrink: f64,
    pub initial_step: f64,
}

impl Default for Backtracking {
    fn default() -> Self {
        Backtracking {
            enabled: true,
            shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WStepConfig {
    /// ℓ1 penalty on the weight matrix.
    pub gamma: f64,
    pub max_iters: usize,
    /// Relative objective decrease that stops the iteration.
    pub tol: f64,
    /// Bound on the minimal-norm subgradient for the converged flag.
    pub kkt_tol: f64,
    pub backtracking: Backtracking,
}

impl Default for WStepConfig {
    fn default() -> Self {
        WStepConfig {
            gamma: 0.0,
            max_iters: 1000,
            tol: 1e-9,
            kkt_tol: 1e-4,
            backtracking: Backtracking::default(),
        }
    }
}

impl WStepConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        WStepConfig {
            gamma,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(Error::Invalid(format!("gamma must be ≥ 0, got {}", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(Error::Invalid("max_iters must be ≥ 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Invalid(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.backtracking.shrink > 0.0 && self.backtracking.shrink < 1.0) {
            return Err(Error::Invalid(format!(
                "backtracking shrink must lie in (0,1), got {}",
                self.backtracking.shrink
            )));
        }
        if !(self.backtracking.initial_step > 0.0) {
            return Err(Error::Invalid("initial step must be > 0".into()));
        }
        Ok(())
    }
}

/// sign(x)·max(|x|−t, 0).
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Smooth part of a weight-subproblem objective; the ℓ1 term is handled by the
/// proximal step and is not part of this trait.
pub trait SmoothObjective {
    /// (rows of W, tasks).
    fn dims(&self) -> (usize, usize);
    fn value(&self, w: &DMatrix<f64>) -> Result<f64>;
    fn grad(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>>;
    /// Upper bound on the gradient's Lipschitz constant, if cheaply available.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }
}

fn check_omega(omega: &DMatrix<f64>, k: usize) -> Result<()> {
    if omega.nrows() != k || omega.ncols() != k {
        return Err(Error::Shape(format!(
            "coupling matrix is {}x{}, expected {k}x{k}",
            omega.nrows(),
            omega.ncols()
        )));
    }
    let scale = omega.amax().max(1.0);
    for i in 0..k {
        for j in (i + 1)..k {
            if (omega[(i, j)] - omega[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Asymmetric(format!(
                    "coupling entry ({i},{j}) differs from its transpose"
                )));
            }
        }
    }
    if omega.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("coupling matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Σ_k s_k·L_k(w_k) + tr(W_c Ω W_cᵀ), where W_c is the leading `coupled_rows`
/// rows of W. Rows past `coupled_rows` (an intercept row) see only the loss.
pub struct ParamCoupled<'a> {
    ds: &'a MultiTaskDataset,
    omega: &'a DMatrix<f64>,
    coupled_rows: usize,
    task_scales: Vec<f64>,
}

impl<'a> ParamCoupled<'a> {
    pub fn new(
        ds: &'a MultiTaskDataset,
        omega: &'a DMatrix<f64>,
        coupled_rows: usize,
        task_scales: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_omega(omega, ds.num_tasks())?;
        if coupled_rows > ds.num_covariates() {
            return Err(Error::Shape(format!(
                "coupled_rows {} exceeds covariate count {}",
                coupled_rows,
                ds.num_covariates()
            )));
        }
        let task_scales =
            task_scales.unwrap_or_else(|| vec![1.0; ds.num_tasks()]);
        if task_scales.len() != ds.num_tasks() {
            return Err(Error::Shape("one scale per task required".into()));
        }
        Ok(ParamCoupled {
            ds,
            omega,
            coupled_rows,
            task_scales,
        })
    }

    /// Every row coupled and unit task scales.
    pub fn full(ds: &'a MultiTaskDataset, omega: &'a DMatrix<f64>) -> Result<Self> {
        Self::new(ds, omega, ds.num_covariates(), None)
    }

    fn trace_term(&self, w: &DMatrix<f64>) -> f64 {
        let wc = w.rows(0, self.coupled_rows);
        let m = wc * self.omega;
        m.component_mul(&wc).sum()
    }
}

impl SmoothObjective for ParamCoupled<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.ds.num_covariates(), self.ds.num_tasks())
    }

    fn value(&self, w: &DMatrix<f64>) -> Result<f64> {
        let mut total = self.trace_term(w);
        for (k, task) in self.ds.tasks.iter().enumerate() {
            let wk = w.column(k).into_owned();
            total += self.task_scales[k] * losses::value(self.ds.loss, &task.x, &task.y, &wk)?;
        }
        Ok(total)
    }

    fn grad(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (d, k_tasks) = self.dims();
        let mut g = DMatrix::zeros(d, k_tasks);
        for (k, task) in self.ds.tasks.iter().enumerate() {
            let wk = w.column(k).into_owned();
            let eval = losses::value_grad(self.ds.loss, &task.x, &task.y, &wk)?;
            g.column_mut(k).copy_from(&(eval.grad * self.task_scales[k]));
        }
        let wc = w.rows(0, self.coupled_rows);
        let coupling = wc * self.omega * 2.0;
        for j in 0..self.coupled_rows {
            for k in 0..k_tasks {
                g[(j, k)] += coupling[(j, k)];
            }
        }
        Ok(g)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for (k, task) in self.ds.tasks.iter().enumerate() {
            let gram = task.x.transpose() * &task.x;
            let top = nalgebra::SymmetricEigen::new(gram).eigenvalues.amax();
            let factor = match self.ds.loss {
                LossKind::Squared => 1.0,
                LossKind::Logistic => 0.25,
            };
            worst = worst.max(self.task_scales[k] * factor * top);
        }
        let omega_top = nalgebra::SymmetricEigen::new(self.omega.clone())
            .eigenvalues
            .amax();
        Some(worst + 2.0 * omega_top)
    }
}

/// Σ_k s_k·½‖y_k − X_k w_k‖² + tr(E Ω Eᵀ) with E's columns e_k = y_k − X_k w_k.
/// Squared loss only; every task must have the same number of rows.
pub struct ResidualCoupled<'a> {
    ds: &'a MultiTaskDataset,
    omega: &'a DMatrix<f64>,
    task_scales: Vec<f64>,
}

impl<'a> ResidualCoupled<'a> {
    pub fn new(
        ds: &'a MultiTaskDataset,
        omega: &'a DMatrix<f64>,
        task_scales: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_omega(omega, ds.num_tasks())?;
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
        let task_scales = task_scales.unwrap_or_else(|| vec![1.0; ds.num_tasks()]);
        if task_scales.len() != ds.num_tasks() {
            return Err(Error::Shape("one scale per task required".into()));
        }
        Ok(ResidualCoupled {
            ds,
            omega,
            task_scales,
        })
    }

    fn residuals(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.ds.tasks[0].num_rows();
        let k_tasks = self.ds.num_tasks();
        let mut e = DMatrix::zeros(n, k_tasks);
        for (k, task) in self.ds.tasks.iter().enumerate() {
            let pred = &task.x * w.column(k);
            e.column_mut(k).copy_from(&(&task.y - pred));
        }
        e
    }
}

impl SmoothObjective for ResidualCoupled<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.ds.num_covariates(), self.ds.num_tasks())
    }

    fn value(&self, w: &DMatrix<f64>) -> Result<f64> {
        let e = self.residuals(w);
        let mut total = (&e * self.omega).component_mul(&e).sum();
        for k in 0..self.ds.num_tasks() {
            total += self.task_scales[k] * 0.5 * e.column(k).norm_squared();
        }
        Ok(total)
    }

    fn grad(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (d, k_tasks) = self.dims();
        let e = self.residuals(w);
        let coupling = &e * self.omega;
        let mut g = DMatrix::zeros(d, k_tasks);
        for (k, task) in self.ds.tasks.iter().enumerate() {
            // d/dw_k of the loss is −Xᵀe_k; of the trace, −2Xᵀ(EΩ)_{:,k}
            let pull = e.column(k) * self.task_scales[k] + coupling.column(k) * 2.0;
            g.column_mut(k).copy_from(&(task.x.transpose() * (-pull)));
        }
        Ok(g)
    }
}

/// Gradient of the smooth part Σ_k L_k + tr(W Ω Wᵀ) with every row coupled.
pub fn smooth_grad(
    w: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    ds: &MultiTaskDataset,
) -> Result<DMatrix<f64>> {
    ParamCoupled::full(ds, omega)?.grad(w)
}

/// Full objective Σ_k L_k + tr(W Ω Wᵀ) + γ‖W‖₁.
pub fn wstep_objective(
    w: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    ds: &MultiTaskDataset,
    gamma: f64,
) -> Result<f64> {
    let smooth = ParamCoupled::full(ds, omega)?.value(w)?;
    Ok(smooth + gamma * w.iter().map(|v| v.abs()).sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct WStepSolution {
    pub weights: DMatrix<f64>,
    /// Objective after every iteration, starting at the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Set when the tolerance stop fired and the subgradient check passed.
    pub converged: bool,
    /// ∞-norm of the minimal-norm subgradient at the returned point.
    pub kkt_residual: f64,
}

/// Solve the weight subproblem for the parameter-coupled objective.
pub fn fista_solve(
    ds: &MultiTaskDataset,
    omega: &DMatrix<f64>,
    cfg: &WStepConfig,
    w0: Option<&DMatrix<f64>>,
) -> Result<WStepSolution> {
    let problem = ParamCoupled::full(ds, omega)?;
    fista_solve_problem(&problem, cfg, ds.num_covariates(), w0)
}

/// Generic driver: `penalized_rows` leading rows of W carry the ℓ1 penalty,
/// any remaining rows are unpenalized (intercepts).
pub fn fista_solve_problem<P: SmoothObjective>(
    problem: &P,
    cfg: &WStepConfig,
    penalized_rows: usize,
    w0: Option<&DMatrix<f64>>,
) -> Result<WStepSolution> {
    cfg.validate()?;
    let (d, k_tasks) = problem.dims();
    if penalized_rows > d {
        return Err(Error::Shape("penalized_rows exceeds row count".into()));
    }
    let mut w = match w0 {
        Some(start) => {
            if start.nrows() != d || start.ncols() != k_tasks {
                return Err(Error::Shape(format!(
                    "warm start is {}x{}, expected {d}x{k_tasks}",
                    start.nrows(),
                    start.ncols()
                )));
            }
            if start.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("warm start has non-finite entries".into()));
            }
            start.clone()
        }
        None => DMatrix::zeros(d, k_tasks),
    };

    let l1 = |m: &DMatrix<f64>| -> f64 {
        m.rows(0, penalized_rows).iter().map(|v| v.abs()).sum()
    };

    let mut step = if cfg.backtracking.enabled {
        cfg.backtracking.initial_step
    } else {
        let l = problem.lipschitz_bound().ok_or_else(|| {
            Error::Invalid("fixed-step mode needs a Lipschitz bound from the problem".into())
        })?;
        if !(l > 0.0) {
            1.0
        } else {
            1.0 / l
        }
    };

    let mut obj = problem.value(&w)? + cfg.gamma * l1(&w);
    if !obj.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            message: "objective not finite at the starting point".into(),
        });
    }
    let mut trace = vec![obj];
    let mut y = w.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut stopped_by_tol = false;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let (mut cand, mut smooth_cand) =
            prox_step(problem, &y, cfg, penalized_rows, &mut step, iter)?;
        let mut cand_obj = smooth_cand + cfg.gamma * l1(&cand);

        if cand_obj > obj {
            // momentum overshot: restart acceleration from the current iterate
            t = 1.0;
            y.copy_from(&w);
            let redo = prox_step(problem, &y, cfg, penalized_rows, &mut step, iter)?;
            cand = redo.0;
            smooth_cand = redo.1;
            cand_obj = smooth_cand + cfg.gamma * l1(&cand);
            if cand_obj > obj {
                // numerical floor reached; keep the current iterate
                cand.copy_from(&w);
                cand_obj = obj;
            }
        }
        if !cand_obj.is_finite() {
            return Err(Error::Diverged {
                iteration: iter,
                message: "objective became non-finite".into(),
            });
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = &cand + (&cand - &w) * beta;
        t = t_next;

        let progress = obj - cand_obj;
        let rel = progress / obj.abs().max(1.0);
        w = cand;
        obj = cand_obj;
        trace.push(obj);
        if rel < cfg.tol {
            // a stalled objective alone is not enough: stay until the
            // subgradient confirms optimality or progress hits the floor
            let grad = problem.grad(&w)?;
            let kkt = min_norm_subgradient_inf(&grad, &w, cfg.gamma, penalized_rows);
            if kkt <= cfg.kkt_tol || progress == 0.0 {
                stopped_by_tol = true;
                break;
            }
        }
    }

    let grad = problem.grad(&w)?;
    let kkt_residual = min_norm_subgradient_inf(&grad, &w, cfg.gamma, penalized_rows);
    Ok(WStepSolution {
        weights: w,
        objective_trace: trace,
        iterations,
        converged: stopped_by_tol && kkt_residual <= cfg.kkt_tol,
        kkt_residual,
    })
}

/// One proximal step from `y`, shrinking `step` until the quadratic upper
/// bound holds (when backtracking is on). Returns the candidate and its
/// smooth objective value.
fn prox_step<P: SmoothObjective>(
    problem: &P,
    y: &DMatrix<f64>,
    cfg: &WStepConfig,
    penalized_rows: usize,
    step: &mut f64,
    iter: usize,
) -> Result<(DMatrix<f64>, f64)> {
    let g = problem.grad(y)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            iteration: iter,
            message: "gradient became non-finite".into(),
        });
    }
    let fy = problem.value(y)?;
    loop {
        let mut cand = y - &g * *step;
        let threshold = *step * cfg.gamma;
        for j in 0..penalized_rows {
            for k in 0..cand.ncols() {
                cand[(j, k)] = soft_threshold(cand[(j, k)], threshold);
            }
        }
        let smooth_cand = problem.value(&cand)?;
        if !cfg.backtracking.enabled {
            return Ok((cand, smooth_cand));
        }
        let diff = &cand - y;
        let bound = fy
            + g.dot(&diff)
            + diff.norm_squared() / (2.0 * *step)
            + 1e-12 * fy.abs().max(1.0);
        if smooth_cand <= bound {
            return Ok((cand, smooth_cand));
        }
        *step *= cfg.backtracking.shrink;
        if *step < 1e-20 {
            return Err(Error::Diverged {
                iteration: iter,
                message: "line search shrank the step below 1e-20".into(),
            });
        }
    }
}

/// ∞-norm of the minimal-norm element of ∂(smooth + γ‖·‖₁) at `w`.
fn min_norm_subgradient_inf(
    grad: &DMatrix<f64>,
    w: &DMatrix<f64>,
    gamma: f64,
    penalized_rows: usize,
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..w.nrows() {
        for k in 0..w.ncols() {
            let g = grad[(j, k)];
            let v = if j >= penalized_rows {
                g.abs()
            } else if w[(j, k)] > 0.0 {
                (g + gamma).abs()
            } else if w[(j, k)] < 0.0 {
                (g - gamma).abs()
            } else {
                (g.abs() - gamma).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TaskData;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn dataset(xs: Vec<DMatrix<f64>>, ys: Vec<DVector<f64>>, loss: LossKind) -> MultiTaskDataset {
        let tasks = xs
            .into_iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (x, y))| TaskData {
                id: format!("t{i}"),
                x,
                y,
            })
            .collect();
        MultiTaskDataset::new(loss, tasks).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(1.5, 1.0), 0.5);
        assert_eq!(soft_threshold(-0.3, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
    }

    #[test]
    fn soft_threshold_minimizes_scalar_prox() {
        // grid-check: soft(x,t) minimizes ½(z−x)² + t|z|
        for &x in &[-2.0, -0.4, 0.0, 0.7, 3.0] {
            for &t in &[0.0, 0.3, 1.1] {
                let best = soft_threshold(x, t);
                let fbest = 0.5 * (best - x).powi(2) + t * best.abs();
                let mut z = -4.0;
                while z <= 4.0 {
                    let f = 0.5 * (z - x).powi(2) + t * z.abs();
                    assert!(fbest <= f + 1e-12);
                    z += 1e-3;
                }
            }
        }
    }

    #[test]
    fn trace_gradient_identity_and_hand_case() {
        // zero data term: X=0 so the loss gradient vanishes
        let zeros2 = DMatrix::zeros(1, 2);
        let ds = dataset(
            vec![zeros2.clone(), zeros2.clone()],
            vec![DVector::zeros(1), DVector::zeros(1)],
            LossKind::Squared,
        );
        let w = DMatrix::identity(2, 2);
        let omega = DMatrix::identity(2, 2);
        let g = smooth_grad(&w, &omega, &ds).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(1, 1)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(0, 1)], 0.0, epsilon = 1e-14);

        let zeros1 = DMatrix::zeros(1, 1);
        let ds = dataset(
            vec![zeros1.clone(), zeros1],
            vec![DVector::zeros(1), DVector::zeros(1)],
            LossKind::Squared,
        );
        let w = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let g = smooth_grad(&w, &omega, &ds).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(0, 1)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn asymmetric_coupling_rejected() {
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        let ds = dataset(
            vec![x.clone(), x],
            vec![DVector::zeros(1), DVector::zeros(1)],
            LossKind::Squared,
        );
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        assert!(smooth_grad(&DMatrix::zeros(1, 2), &omega, &ds).is_err());
    }

    #[test]
    fn objective_at_zero_is_pure_loss_and_linear_in_gamma() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let ds = dataset(vec![x.clone(), x], vec![y.clone(), y], LossKind::Squared);
        let omega = DMatrix::identity(2, 2);
        let w0 = DMatrix::zeros(2, 2);
        let at_zero = wstep_objective(&w0, &omega, &ds, 3.0).unwrap();
        assert_abs_diff_eq!(at_zero, 5.0, epsilon = 1e-14);

        let w = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.0]);
        let g1 = wstep_objective(&w, &omega, &ds, 1.0).unwrap();
        let g2 = wstep_objective(&w, &omega, &ds, 2.0).unwrap();
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        assert_abs_diff_eq!(g2 - g1, l1, epsilon = 1e-12);
    }

    #[test]
    fn single_task_ols_recovered() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let ds = dataset(vec![x], vec![y], LossKind::Squared);
        let omega = DMatrix::zeros(1, 1);
        let cfg = WStepConfig {
            tol: 1e-14,
            ..Default::default()
        };
        let sol = fista_solve(&ds, &omega, &cfg, None).unwrap();
        assert_abs_diff_eq!(sol.weights[(0, 0)], 1.0, epsilon = 1e-6);
        assert!(sol.converged);
    }

    #[test]
    fn lasso_zero_solution_at_critical_gamma() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, -0.5, 0.25, 1.0, -0.75, 0.5]);
        let y = DVector::from_vec(vec![0.3, -0.8, 0.9]);
        let xty = x.transpose() * &y;
        let critical = xty.amax();
        let ds = dataset(vec![x], vec![y], LossKind::Squared);
        let omega = DMatrix::zeros(1, 1);
        let cfg = WStepConfig::with_gamma(critical);
        let sol = fista_solve(&ds, &omega, &cfg, None).unwrap();
        assert!(sol.weights.iter().all(|v| *v == 0.0));
        assert!(sol.kkt_residual <= 1e-12);
        // just below the threshold the solution leaves zero
        let cfg = WStepConfig::with_gamma(critical * 0.99);
        let sol = fista_solve(&ds, &omega, &cfg, None).unwrap();
        assert!(sol.weights.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn objective_trace_never_increases() {
        let x1 = DMatrix::from_row_slice(4, 3, &[
            0.5, -1.0, 0.3, 1.2, 0.4, -0.7, -0.9, 0.8, 0.1, 0.2, -0.3, 1.5,
        ]);
        let x2 = DMatrix::from_row_slice(4, 3, &[
            -0.2, 0.9, 1.1, 0.7, -0.5, 0.4, 1.3, 0.2, -0.8, -0.6, 1.0, 0.5,
        ]);
        let y1 = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
        let y2 = DVector::from_vec(vec![-1.0, 0.75, 0.5, -0.25]);
        let ds = dataset(vec![x1, x2], vec![y1, y2], LossKind::Squared);
        let omega = DMatrix::from_row_slice(2, 2, &[1.5, -0.6, -0.6, 1.5]);
        let cfg = WStepConfig {
            gamma: 0.2,
            ..Default::default()
        };
        let sol = fista_solve(&ds, &omega, &cfg, None).unwrap();
        for pair in sol.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10);
        }
        assert!(sol.converged);
    }

    #[test]
    fn fixed_step_mode_agrees_with_backtracking() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.4, 1.1, 0.6, -0.9]);
        let y = DVector::from_vec(vec![0.5, -1.0, 0.8]);
        let ds = dataset(vec![x.clone(), x], vec![y.clone(), y], LossKind::Squared);
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, -0.4, -0.4, 1.0]);
        let cfg_bt = WStepConfig {
            gamma: 0.1,
            ..Default::default()
        };
        let mut cfg_fixed = cfg_bt.clone();
        cfg_fixed.backtracking.enabled = false;
        let a = fista_solve(&ds, &omega, &cfg_bt, None).unwrap();
        let b = fista_solve(&ds, &omega, &cfg_fixed, None).unwrap();
        let oa = wstep_objective(&a.weights, &omega, &ds, 0.1).unwrap();
        let ob = wstep_objective(&b.weights, &omega, &ds, 0.1).unwrap();
        assert_abs_diff_eq!(oa, ob, epsilon = 1e-7);
    }

    #[test]
    fn stronger_coupling_pulls_columns_together() {
        // two tasks with different targets; the coupling penalty b‖w₁−w₂‖²-like
        // term grows with b, so the fitted columns approach each other
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
        let y1 = DVector::from_vec(vec![2.0, 0.5, 2.5, 1.5]);
        let y2 = DVector::from_vec(vec![0.5, 2.0, 2.5, -1.5]);
        let ds = dataset(vec![x.clone(), x], vec![y1, y2], LossKind::Squared);
        let mut dist_prev = f64::INFINITY;
        for b in [0.0, 2.0, 8.0] {
            let omega =
                DMatrix::from_row_slice(2, 2, &[1.0 + b, -b, -b, 1.0 + b]);
            let sol = fista_solve(&ds, &omega, &WStepConfig::default(), None).unwrap();
            let dist = (sol.weights.column(0) - sol.weights.column(1)).norm();
            assert!(dist < dist_prev);
            dist_prev = dist;
        }
    }

    #[test]
    fn intercept_row_escapes_penalty_and_coupling() {
        // one covariate plus an appended all-ones column; huge gamma kills the
        // slope but the unpenalized intercept row still absorbs the mean
        let x = DMatrix::from_row_slice(4, 2, &[0.1, 1.0, -0.2, 1.0, 0.15, 1.0, -0.05, 1.0]);
        let y = DVector::from_vec(vec![5.0, 5.2, 4.9, 5.1]);
        let ds = dataset(vec![x], vec![y], LossKind::Squared);
        let omega = DMatrix::from_row_slice(1, 1, &[1.0]);
        let problem = ParamCoupled::new(&ds, &omega, 1, None).unwrap();
        let cfg = WStepConfig {
            gamma: 100.0,
            ..Default::default()
        };
        let sol = fista_solve_problem(&problem, &cfg, 1, None).unwrap();
        assert_eq!(sol.weights[(0, 0)], 0.0);
        assert!((sol.weights[(1, 0)] - 5.05).abs() < 1e-4);
    }
}
