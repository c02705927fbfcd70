use super::ModelParameters;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators and the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelParameters,
    pub v: ModelParameters,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut ModelParameters,
    grads: &ModelParameters,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape("adam: parameter sets differ".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let g = grads
            .get(name)
            .ok_or_else(|| Error::Shape(format!("adam: no gradient for '{name}'")))?;
        if g.shape != p.shape {
            return Err(Error::Shape(format!("adam: gradient shape differs for '{name}'")));
        }
        let m = state.m.tensor_mut(name);
        let v = state.v.tensor_mut(name);
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = config.beta1 * m.data[i] + (1.0 - config.beta1) * gi;
            v.data[i] = config.beta2 * v.data[i] + (1.0 - config.beta2) * gi * gi;
            let m_hat = m.data[i] / c1;
            let v_hat = v.data[i] / c2;
            p.data[i] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}
