//! Adam with decoupled weight decay, and the cosine learning-rate schedule.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new<T: AsRef<[f64]>>(params: &[T]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.as_ref().len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// Cosine annealing from `lr_max` at epoch 0 to `lr_min` at the last epoch.
pub fn cosine_lr(epoch: f64, total_epochs: usize, lr_max: f64, lr_min: f64) -> Result<f64> {
    if total_epochs == 0 || !(epoch >= 0.0 && epoch <= (total_epochs - 1) as f64) {
        return Err(Error::OutOfRange(format!("epoch {epoch} of {total_epochs}")));
    }
    if total_epochs == 1 {
        return Ok(lr_max);
    }
    let phase = PI * epoch / (total_epochs - 1) as f64;
    Ok(lr_min + 0.5 * (lr_max - lr_min) * (1.0 + phase.cos()))
}

/// One decoupled-weight-decay Adam update. On a non-finite gradient nothing
/// is modified and an error naming the tensor is returned.
pub fn adam_step<P, G>(params: &mut [P], grads: &[G], state: &mut OptimizerState, lr: f64, weight_decay: f64, cfg: &AdamConfig) -> Result<()>
where
    P: AsMut<[f64]> + AsRef<[f64]>,
    G: AsRef<[f64]>,
{
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape {
            expected: vec![params.len()],
            got: vec![grads.len()],
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        let (p, g) = (p.as_ref(), g.as_ref());
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::Shape {
                expected: vec![p.len()],
                got: vec![g.len()],
            });
        }
        if let Some(j) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of tensor {i} at element {j}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - lr * weight_decay;
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, (pj, &gj)) in p.as_mut().iter_mut().zip(g.as_ref()).enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            *pj = *pj * decay - lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
