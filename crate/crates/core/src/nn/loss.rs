use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before the logarithm.
pub const BCE_EPS: f64 = 1e-12;

fn check(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "loss inputs have lengths {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Mean squared error and its gradient `2 (pred - target) / N`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check(pred, target)?;
    let mut grad = vec![0.0; pred.len()];
    let sum = mse_into(pred, target, pred.len(), &mut grad);
    Ok((sum / pred.len() as f64, grad))
}

/// Mean binary cross-entropy and its gradient with respect to `prob`.
pub fn bce_loss(prob: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check(prob, target)?;
    let mut grad = vec![0.0; prob.len()];
    let sum = bce_into(prob, target, prob.len(), &mut grad);
    Ok((sum / prob.len() as f64, grad))
}

/// Writes the gradient of `sum / norm` into `grad`; returns the unnormalised sum.
pub(crate) fn mse_into(pred: &[f64], target: &[f64], norm: usize, grad: &mut [f64]) -> f64 {
    let scale = 2.0 / norm as f64;
    let mut sum = 0.0;
    for ((p, t), g) in pred.iter().zip(target).zip(grad.iter_mut()) {
        let e = p - t;
        sum += e * e;
        *g = scale * e;
    }
    sum
}

pub(crate) fn bce_into(prob: &[f64], target: &[f64], norm: usize, grad: &mut [f64]) -> f64 {
    let inv = 1.0 / norm as f64;
    let mut sum = 0.0;
    for ((&p, &y), g) in prob.iter().zip(target).zip(grad.iter_mut()) {
        let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        sum -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        *g = if pc == p {
            inv * ((1.0 - y) / (1.0 - p) - y / p)
        } else {
            0.0
        };
    }
    sum
}
