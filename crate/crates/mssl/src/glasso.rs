//! ADMM solver for the penalized precision-matrix subproblem:
//! minimize tr(SΘ) − c·log|Θ| + λ‖Θ‖₁ over symmetric positive definite Θ.
//!
//! Splitting Θ = Z gives closed-form updates: the Θ-step is an
//! eigendecomposition followed by a per-eigenvalue quadratic root, the Z-step
//! a soft threshold (diagonal included), and U the scaled dual. The support
//! is read off Z, whose zeros are exact; Θ carries the numeric values.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::wstep::soft_threshold;

#[derive(Debug, Clone)]
pub struct AdmmConfig {
    /// ℓ1 penalty on Θ entries.
    pub lambda: f64,
    /// ADMM penalty parameter.
    pub rho: f64,
    /// Coefficient c on the log-determinant.
    pub logdet_coeff: f64,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            lambda: 0.0,
            rho: 1.0,
            logdet_coeff: 1.0,
            max_iters: 1000,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
        }
    }
}

impl AdmmConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        AdmmConfig {
            lambda,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::Invalid(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::Invalid(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.logdet_coeff > 0.0) || !self.logdet_coeff.is_finite() {
            return Err(Error::Invalid(format!(
                "logdet coefficient must be > 0, got {}",
                self.logdet_coeff
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Invalid("max_iters must be ≥ 1".into()));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel >= 0.0) {
            return Err(Error::Invalid("eps_abs must be > 0 and eps_rel ≥ 0".into()));
        }
        Ok(())
    }
}

/// Symmetrized Gram matrix (MᵀM + (MᵀM)ᵀ)/2 of the columns of `m`.
pub fn scatter(m: &DMatrix<f64>) -> DMatrix<f64> {
    let g = m.transpose() * m;
    (&g + g.transpose()) * 0.5
}

fn check_square_symmetric(s: &DMatrix<f64>, what: &str) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::Shape(format!(
            "{what} is {}x{}, expected square",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("{what} has non-finite entries")));
    }
    let scale = s.amax().max(1.0);
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Asymmetric(format!(
                    "{what} entry ({i},{j}) differs from its transpose"
                )));
            }
        }
    }
    Ok(())
}

/// Positive root of ρθ² − λθ − c = 0 for one eigenvalue λ.
fn eigen_root(lambda_i: f64, rho: f64, c: f64) -> f64 {
    (lambda_i + (lambda_i * lambda_i + 4.0 * rho * c).sqrt()) / (2.0 * rho)
}

/// |θ(ρθ − λ) − c| in the cancellation-free form; exercised every iteration.
fn eigen_root_residual(theta: f64, lambda_i: f64, rho: f64, c: f64) -> f64 {
    (theta * rho.mul_add(theta, -lambda_i) - c).abs()
}

fn theta_update_impl(
    s: &DMatrix<f64>,
    z: &DMatrix<f64>,
    u: &DMatrix<f64>,
    rho: f64,
    c: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let k = s.nrows();
    if z.nrows() != k || z.ncols() != k || u.nrows() != k || u.ncols() != k {
        return Err(Error::Shape("Z and U must match the scatter dimensions".into()));
    }
    if k == 1 {
        let m = rho * (z[(0, 0)] - u[(0, 0)]) - s[(0, 0)];
        let root = eigen_root(m, rho, c);
        let resid = eigen_root_residual(root, m, rho, c);
        return Ok((DMatrix::from_element(1, 1, root), resid));
    }
    let m = (z - u) * rho - s;
    let m = (&m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut worst = 0.0f64;
    let mut roots = eig.eigenvalues.clone();
    for i in 0..k {
        let root = eigen_root(eig.eigenvalues[i], rho, c);
        worst = worst.max(eigen_root_residual(root, eig.eigenvalues[i], rho, c));
        roots[i] = root;
    }
    let q = &eig.eigenvectors;
    let theta = q * DMatrix::from_diagonal(&roots) * q.transpose();
    let theta = (&theta + theta.transpose()) * 0.5;
    Ok((theta, worst))
}

/// Minimizer of tr(SΘ) − c·log|Θ| + (ρ/2)‖Θ − Z + U‖²_F. Always positive
/// definite: every transformed eigenvalue is the positive quadratic root.
pub fn theta_update(
    s: &DMatrix<f64>,
    z: &DMatrix<f64>,
    u: &DMatrix<f64>,
    rho: f64,
    c: f64,
) -> Result<DMatrix<f64>> {
    check_square_symmetric(s, "scatter matrix")?;
    Ok(theta_update_impl(s, z, u, rho, c)?.0)
}

/// Entrywise soft threshold of Θ + U at λ/ρ, diagonal included.
pub fn z_update(theta: &DMatrix<f64>, u: &DMatrix<f64>, lambda: f64, rho: f64) -> DMatrix<f64> {
    let t = lambda / rho;
    let mut z = theta + u;
    for v in z.iter_mut() {
        *v = soft_threshold(*v, t);
    }
    z
}

/// ∞-norm of the minimal-norm subgradient of tr(SΩ) − c·log|Ω| + λ‖Ω‖₁ at a
/// positive definite Ω; zero entries of Ω use the interval subdifferential.
pub fn kkt_residual(s: &DMatrix<f64>, omega: &DMatrix<f64>, lambda: f64, c: f64) -> Result<f64> {
    check_square_symmetric(s, "scatter matrix")?;
    check_square_symmetric(omega, "precision matrix")?;
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("precision matrix".into()))?;
    let inv = chol.inverse();
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            let g = s[(i, j)] - c * inv[(i, j)];
            let v = if omega[(i, j)] > 0.0 {
                (g + lambda).abs()
            } else if omega[(i, j)] < 0.0 {
                (g - lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// tr(SΩ) − c·log|Ω| + λ‖Ω‖₁ for a positive definite Ω.
pub fn subproblem_value(
    s: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    lambda: f64,
    c: f64,
) -> Result<f64> {
    if s.nrows() != omega.nrows() || s.ncols() != omega.ncols() {
        return Err(Error::Shape("scatter and precision sizes differ".into()));
    }
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("precision matrix".into()))?;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = s.component_mul(omega).sum();
    let l1: f64 = omega.iter().map(|v| v.abs()).sum();
    Ok(trace - c * logdet + lambda * l1)
}

/// Dual state carried across solves for warm starting.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub z: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct AdmmSolution {
    /// Numeric precision estimate (the Θ iterate).
    pub precision: DMatrix<f64>,
    /// Exact-zero pattern from Z: off-diagonal pairs (i, j) with i < j.
    pub support: Vec<(usize, usize)>,
    pub state: AdmmState,
    pub converged: bool,
    pub iterations: usize,
    /// Largest per-eigenvalue root-equation residual seen across iterations.
    pub max_identity_residual: f64,
}

/// Run ADMM on the scatter matrix `s`, optionally warm started from a
/// previous solve's state. Non-convergence is reported through the flag,
/// not an error.
pub fn admm_solve(
    s: &DMatrix<f64>,
    cfg: &AdmmConfig,
    warm: Option<&AdmmState>,
) -> Result<AdmmSolution> {
    cfg.validate()?;
    check_square_symmetric(s, "scatter matrix")?;
    let k = s.nrows();
    let (mut z, mut u) = match warm {
        Some(state) => {
            if state.z.nrows() != k || state.z.ncols() != k || state.u.nrows() != k
                || state.u.ncols() != k
            {
                return Err(Error::Shape("warm-start state does not match the scatter".into()));
            }
            (state.z.clone(), state.u.clone())
        }
        None => (DMatrix::zeros(k, k), DMatrix::zeros(k, k)),
    };

    let mut theta = DMatrix::zeros(k, k);
    let mut converged = false;
    let mut iterations = 0;
    let mut max_identity_residual = 0.0f64;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let (next_theta, resid) = theta_update_impl(s, &z, &u, cfg.rho, cfg.logdet_coeff)?;
        theta = next_theta;
        max_identity_residual = max_identity_residual.max(resid);

        let z_prev = z;
        z = z_update(&theta, &u, cfg.lambda, cfg.rho);
        u += &theta - &z;

        let r_norm = (&theta - &z).norm();
        let s_norm = cfg.rho * (&z - &z_prev).norm();
        let eps_pri =
            k as f64 * cfg.eps_abs + cfg.eps_rel * theta.norm().max(z.norm());
        let eps_dual = k as f64 * cfg.eps_abs + cfg.eps_rel * cfg.rho * u.norm();
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }
    }

    let mut support = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            if z[(i, j)] != 0.0 {
                support.push((i, j));
            }
        }
    }

    Ok(AdmmSolution {
        precision: theta,
        support,
        state: AdmmState { z, u },
        converged,
        iterations,
        max_identity_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scatter_is_symmetric_gram() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, -1.0, 2.0, 1.0]);
        let s = scatter(&m);
        assert_abs_diff_eq!(s[(0, 0)], 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[(1, 1)], 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[(0, 1)], 4.0, epsilon = 1e-14);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn scalar_theta_update_digit_for_digit() {
        let s = DMatrix::from_element(1, 1, 1.0);
        let z = DMatrix::zeros(1, 1);
        let u = DMatrix::zeros(1, 1);
        let theta = theta_update(&s, &z, &u, 1.0, 1.0).unwrap();
        assert_eq!(theta[(0, 0)], (-1.0 + 5.0f64.sqrt()) / 2.0);

        let s = DMatrix::zeros(1, 1);
        let z = DMatrix::from_element(1, 1, 1.5);
        let theta = theta_update(&s, &z, &u, 2.0, 1.0).unwrap();
        assert_eq!(theta[(0, 0)], (3.0 + 17.0f64.sqrt()) / 4.0);
        assert_abs_diff_eq!(theta[(0, 0)], 1.7807764064044151, epsilon = 1e-15);
    }

    #[test]
    fn zero_eigenvalue_maps_to_sqrt_ratio() {
        let s = DMatrix::zeros(2, 2);
        let z = DMatrix::zeros(2, 2);
        let u = DMatrix::zeros(2, 2);
        let theta = theta_update(&s, &z, &u, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(theta[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(theta[(1, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(theta[(0, 1)], 0.0, epsilon = 1e-12);

        let theta = theta_update(&s, &z, &u, 4.0, 1.0).unwrap();
        assert_abs_diff_eq!(theta[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_input_uses_per_eigenvalue_roots() {
        let s = DMatrix::from_partial_diagonal(2, 2, &[2.0, 4.0]);
        let z = DMatrix::zeros(2, 2);
        let u = DMatrix::zeros(2, 2);
        let theta = theta_update(&s, &z, &u, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(theta[(0, 0)], -1.0 + 2.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(theta[(1, 1)], -2.0 + 5.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(theta[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn theta_update_output_is_positive_definite() {
        let s = DMatrix::from_row_slice(3, 3, &[
            4.0, 1.0, -2.0, 1.0, 3.0, 0.5, -2.0, 0.5, 5.0,
        ]);
        let z = DMatrix::from_row_slice(3, 3, &[
            1.0, 0.2, 0.0, 0.2, 1.0, -0.1, 0.0, -0.1, 1.0,
        ]);
        let u = DMatrix::from_row_slice(3, 3, &[
            0.1, 0.0, 0.3, 0.0, -0.2, 0.0, 0.3, 0.0, 0.1,
        ]);
        for rho in [0.5, 1.0, 4.0] {
            for c in [0.5, 1.0, 3.0] {
                let theta = theta_update(&s, &z, &u, rho, c).unwrap();
                assert!(theta.clone().cholesky().is_some());
            }
        }
    }

    #[test]
    fn z_update_thresholds_everything_including_diagonal() {
        let theta = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 0.05]);
        let u = DMatrix::zeros(2, 2);
        let z = z_update(&theta, &u, 0.2, 1.0);
        assert_abs_diff_eq!(z[(0, 0)], 0.8, epsilon = 1e-15);
        assert_eq!(z[(1, 1)], 0.0);
        assert_abs_diff_eq!(z[(0, 1)], -0.1, epsilon = 1e-15);
    }

    #[test]
    fn unpenalized_solve_matches_scaled_inverse() {
        let s = DMatrix::from_partial_diagonal(2, 2, &[2.0, 4.0]);
        let cfg = AdmmConfig {
            eps_abs: 1e-10,
            eps_rel: 1e-8,
            max_iters: 5000,
            ..Default::default()
        };
        let sol = admm_solve(&s, &cfg, None).unwrap();
        assert!(sol.converged);
        assert_abs_diff_eq!(sol.precision[(0, 0)], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.precision[(1, 1)], 0.25, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.precision[(0, 1)], 0.0, epsilon = 1e-7);

        let s = DMatrix::identity(3, 3);
        let sol = admm_solve(&s, &cfg, None).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(sol.precision[(i, i)], 1.0, epsilon = 1e-7);
        }
        assert!(sol.max_identity_residual <= 1e-10);
    }

    #[test]
    fn heavy_penalty_gives_diagonal_closed_form() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 2.0]);
        let cfg = AdmmConfig {
            lambda: 10.0,
            eps_abs: 1e-9,
            eps_rel: 1e-7,
            max_iters: 5000,
            ..Default::default()
        };
        let sol = admm_solve(&s, &cfg, None).unwrap();
        assert!(sol.converged);
        assert!(sol.support.is_empty());
        // diagonal stationarity: s_ii + λ = c/θ_ii
        assert_abs_diff_eq!(sol.precision[(0, 0)], 1.0 / 12.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.precision[(1, 1)], 1.0 / 12.0, epsilon = 1e-6);
        assert!(sol.precision[(0, 1)].abs() < 1e-6);
    }

    #[test]
    fn kkt_residual_near_zero_after_tight_solve() {
        let s = DMatrix::from_row_slice(3, 3, &[
            3.0, 0.8, 0.2, 0.8, 2.5, -0.6, 0.2, -0.6, 4.0,
        ]);
        let cfg = AdmmConfig {
            lambda: 0.4,
            eps_abs: 1e-11,
            eps_rel: 1e-9,
            max_iters: 20000,
            ..Default::default()
        };
        let sol = admm_solve(&s, &cfg, None).unwrap();
        assert!(sol.converged);
        let r = kkt_residual(&s, &sol.state.z, 0.4, 1.0).unwrap();
        assert!(r <= 1e-6, "kkt residual {r}");
    }

    #[test]
    fn asymmetric_scatter_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(admm_solve(&s, &AdmmConfig::default(), None).is_err());
    }

    #[test]
    fn warm_start_state_reused() {
        let s = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0]);
        let cfg = AdmmConfig::with_lambda(0.2);
        let cold = admm_solve(&s, &cfg, None).unwrap();
        let warm = admm_solve(&s, &cfg, Some(&cold.state)).unwrap();
        assert!(warm.iterations <= cold.iterations);
        assert!(warm.converged);
    }
}
