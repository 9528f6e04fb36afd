use serde::{Deserialize, Serialize};

use super::ModelState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    /// L2 coefficient folded into the gradient before the moment updates.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(
    model: &mut ModelState,
    grads: &[ndarray::Array2<f64>],
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != model.params.len() {
        return Err(Error::Shape(format!(
            "{} gradients for {} parameters",
            grads.len(),
            model.params.len()
        )));
    }
    for (p, g) in model.params.iter().zip(grads) {
        if p.value.raw_dim() != g.raw_dim() {
            return Err(Error::Shape(format!(
                "gradient for {} has shape {:?}",
                p.name,
                g.shape()
            )));
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", p.name)));
        }
    }
    model.adam.step += 1;
    let t = model.adam.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let state = &mut model.adam;
    for ((p, g), (m, v)) in model
        .params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        ndarray::Zip::from(&mut p.value)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|w, &g, m, v| {
                let g = g + cfg.weight_decay * *w;
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            });
    }
    Ok(())
}
