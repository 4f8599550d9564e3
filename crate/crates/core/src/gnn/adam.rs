use serde::{Deserialize, Serialize};

use super::{GnnModel, GradientSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Which parameters an optimizer step may change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateScope {
    All,
    /// Layer matrices only; head weights and bias are frozen.
    BackboneOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    /// First moments, one flat vector per parameter tensor.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(model: &GnnModel, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        OptimizerState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    model: &mut GnnModel,
    grads: &GradientSet,
    state: &mut OptimizerState,
    scope: UpdateScope,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    let n_backbone = 3 * model.layers.len();
    let mut params = model.tensors_mut();
    if params.len() != grad_tensors.len() || params.len() != state.m.len() {
        return Err(Error::Dimension("optimizer state does not match the model".into()));
    }
    for ((p, g), m) in params.iter().zip(&grad_tensors).zip(&state.m) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::Dimension(format!(
                "tensor of {} parameters got {} gradients and {} moments",
                p.len(),
                g.len(),
                m.len()
            )));
        }
    }

    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (idx, (p, g)) in params.iter_mut().zip(&grad_tensors).enumerate() {
        if scope == UpdateScope::BackboneOnly && idx >= n_backbone {
            continue;
        }
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
