//! Per-task loss values and gradients for the squared and logistic losses.
//!
//! Both losses are convex in `w`; the logistic path never exponentiates a
//! positive argument, so values and gradients stay finite for any predictor.

use nalgebra::{DMatrix, DVector};

use crate::data::LossKind;
use crate::error::{Error, Result};

/// Loss value together with its gradient in `w`.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub value: f64,
    pub grad: DVector<f64>,
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() || x.ncols() != w.len() {
        return Err(Error::Shape(format!(
            "loss shapes: X is {}x{}, y has {}, w has {}",
            x.nrows(),
            x.ncols(),
            y.len(),
            w.len()
        )));
    }
    Ok(())
}

/// ½‖Xw − y‖² and its gradient Xᵀ(Xw − y).
pub fn squared_value_grad(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<LossEval> {
    check_shapes(x, y, w)?;
    let r = x * w - y;
    Ok(LossEval {
        value: 0.5 * r.norm_squared(),
        grad: x.transpose() * r,
    })
}

pub fn squared_value(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    check_shapes(x, y, w)?;
    let r = x * w - y;
    Ok(0.5 * r.norm_squared())
}

/// log(1 + eᶻ) without overflow for large |z|.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function, split on the sign of `z` so the exponent is never positive.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood Σᵢ log(1 + exp(xᵢᵀw)) − yᵢ·xᵢᵀw for labels in {0,1},
/// with gradient Xᵀ(σ(Xw) − y).
pub fn logistic_value_grad(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<LossEval> {
    check_shapes(x, y, w)?;
    check_labels(y)?;
    let z = x * w;
    let mut value = 0.0;
    let mut residual = DVector::zeros(z.len());
    for i in 0..z.len() {
        value += row_loss(z[i], y[i]);
        residual[i] = sigmoid(z[i]) - y[i];
    }
    Ok(LossEval {
        value,
        grad: x.transpose() * residual,
    })
}

pub fn logistic_value(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    check_shapes(x, y, w)?;
    check_labels(y)?;
    let z = x * w;
    let mut value = 0.0;
    for i in 0..z.len() {
        value += row_loss(z[i], y[i]);
    }
    Ok(value)
}

/// log(1 + eᶻ) − y·z, rewritten per label so large margins never cancel.
fn row_loss(z: f64, y: f64) -> f64 {
    if y == 1.0 {
        log1p_exp(-z)
    } else {
        log1p_exp(z)
    }
}

fn check_labels(y: &DVector<f64>) -> Result<()> {
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::Invalid(format!("label {bad} outside {{0,1}}")));
    }
    Ok(())
}

/// Dispatch on the loss kind.
pub fn value_grad(
    kind: LossKind,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<LossEval> {
    match kind {
        LossKind::Squared => squared_value_grad(x, y, w),
        LossKind::Logistic => logistic_value_grad(x, y, w),
    }
}

pub fn value(kind: LossKind, x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    match kind {
        LossKind::Squared => squared_value(x, y, w),
        LossKind::Logistic => logistic_value(x, y, w),
    }
}
