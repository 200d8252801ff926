//! Shared test oracles. Everything here is written against the math, not the
//! library: plain scalar loops, no calls into the solver code paths under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Central finite-difference gradient of `f` at `x`, step `h`.
pub fn fd_gradient<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Central finite-difference gradient over a matrix argument, flattened entry by entry.
pub fn fd_gradient_matrix<F: Fn(&DMatrix<f64>) -> f64>(
    f: F,
    w: &DMatrix<f64>,
    h: f64,
) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(w.nrows(), w.ncols());
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[(i, j)] += h;
            wm[(i, j)] -= h;
            g[(i, j)] = (f(&wp) - f(&wm)) / (2.0 * h);
        }
    }
    g
}

pub fn max_rel_err(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    let scale = want.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let mut worst = 0.0f64;
    for (g, w) in got.iter().zip(want.iter()) {
        worst = worst.max((g - w).abs() / scale);
    }
    worst
}

/// Squared-loss value written as an explicit sample loop.
pub fn squared_value_loop(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let mut pred = 0.0;
        for j in 0..x.ncols() {
            pred += x[(i, j)] * w[j];
        }
        let r = pred - y[i];
        total += 0.5 * r * r;
    }
    total
}

/// Logistic negative log-likelihood written as an explicit sample loop.
/// Uses the naive formula; callers keep |x'w| moderate so overflow is not hit.
pub fn logistic_value_loop(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let mut z = 0.0;
        for j in 0..x.ncols() {
            z += x[(i, j)] * w[j];
        }
        total += (1.0 + z.exp()).ln() - y[i] * z;
    }
    total
}

/// W-step objective Σ_k loss_k + tr(W Ω Wᵀ) + γ‖W‖₁, all explicit loops.
pub fn wstep_objective_loop(
    xs: &[DMatrix<f64>],
    ys: &[DVector<f64>],
    omega: &DMatrix<f64>,
    w: &DMatrix<f64>,
    gamma: f64,
) -> f64 {
    let k_tasks = xs.len();
    let d = w.nrows();
    let mut total = 0.0;
    for k in 0..k_tasks {
        total += squared_value_loop(&xs[k], &ys[k], &w.column(k).into_owned());
    }
    // tr(W Ω Wᵀ) = Σ_j Σ_{a,b} W[j,a] Ω[a,b] W[j,b]
    for j in 0..d {
        for a in 0..k_tasks {
            for b in 0..k_tasks {
                total += w[(j, a)] * omega[(a, b)] * w[(j, b)];
            }
        }
    }
    for v in w.iter() {
        total += gamma * v.abs();
    }
    total
}

/// Coordinate-descent solver for the squared-loss W-step. One coordinate at a
/// time, exact scalar minimization with soft thresholding, swept to a fixed
/// point. Deliberately naive: recomputes residuals from scratch each update.
pub fn coordinate_descent_wstep(
    xs: &[DMatrix<f64>],
    ys: &[DVector<f64>],
    omega: &DMatrix<f64>,
    gamma: f64,
    sweeps: usize,
) -> DMatrix<f64> {
    let k_tasks = xs.len();
    let d = xs[0].ncols();
    let mut w: DMatrix<f64> = DMatrix::zeros(d, k_tasks);
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for k in 0..k_tasks {
            for j in 0..d {
                // quadratic coefficient: ‖X_k[:,j]‖² from the loss, 2Ω_kk from the trace
                let mut col_sq = 0.0;
                for i in 0..xs[k].nrows() {
                    col_sq += xs[k][(i, j)] * xs[k][(i, j)];
                }
                let a = col_sq + 2.0 * omega[(k, k)];
                // linear coefficient at w_jk = 0: grad of loss without the j-th term,
                // plus the trace cross terms
                let mut b = 0.0;
                for i in 0..xs[k].nrows() {
                    let mut pred = 0.0;
                    for jj in 0..d {
                        if jj != j {
                            pred += xs[k][(i, jj)] * w[(jj, k)];
                        }
                    }
                    b += xs[k][(i, j)] * (pred - ys[k][i]);
                }
                for b_task in 0..k_tasks {
                    if b_task != k {
                        b += 2.0 * omega[(k, b_task)] * w[(j, b_task)];
                    }
                }
                if a <= 0.0 {
                    continue;
                }
                let new = soft(-b, gamma) / a;
                moved = moved.max((new - w[(j, k)]).abs());
                w[(j, k)] = new;
            }
        }
        if moved < 1e-13 {
            break;
        }
    }
    w
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Bisection root finder for strictly increasing `f` on [lo, hi].
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0, "root not bracketed");
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// RMSE computed as an explicit loop.
pub fn rmse_loop(pred: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..pred.len() {
        let r = pred[i] - truth[i];
        s += r * r;
    }
    (s / pred.len() as f64).sqrt()
}

/// Simple deterministic pseudo-random stream for oracle-side instance
/// generation, independent of the library's RNG choices (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in [-1, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    /// Standard normal via Box-Muller on two uniforms.
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let u2 = ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn matrix(&mut self, n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| self.normal())
    }

    pub fn vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.normal())
    }

    /// Random symmetric PD matrix A Aᵀ + εI.
    pub fn spd(&mut self, k: usize) -> DMatrix<f64> {
        let a = self.matrix(k, k);
        let mut s = &a * a.transpose();
        for i in 0..k {
            s[(i, i)] += 0.5;
        }
        s
    }
}
