use serde::{Deserialize, Serialize};

use super::{mismatch, Real, Tensor, TensorError};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> AdamMoments<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

/// One bias-corrected Adam update of `param` in place. `step` counts from 1.
pub fn adam_step<T: Real>(
    param: &mut [T],
    grad: &[T],
    state: &mut AdamMoments<T>,
    step: u64,
    config: &AdamConfig,
) -> Result<(), TensorError> {
    if grad.len() != param.len() || state.m.len() != param.len() || state.v.len() != param.len() {
        return Err(mismatch(
            "adam: parameter, gradient and state lengths differ",
        ));
    }
    assert!(step >= 1, "adam step index starts at 1");
    let AdamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = *config;
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    for (((p, &g), m), v) in param
        .iter_mut()
        .zip(grad)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let g = g.as_f64();
        let m_new = b1 * m.as_f64() + (1.0 - b1) * g;
        let v_new = b2 * v.as_f64() + (1.0 - b2) * g * g;
        *m = T::from_f64(m_new);
        *v = T::from_f64(v_new);
        let m_hat = m_new / c1;
        let v_hat = v_new / c2;
        *p = T::from_f64(p.as_f64() - lr * m_hat / (v_hat.sqrt() + eps));
    }
    Ok(())
}

/// Adam over an ordered list of parameter tensors, reading their `grad` slots.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<AdamMoments<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Update every parameter using its accumulated gradient. The parameter list must keep
    /// the same order and shapes across calls.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<(), TensorError> {
        if self.moments.is_empty() {
            self.moments = params.iter().map(|p| AdamMoments::zeros(p.len())).collect();
        }
        if self.moments.len() != params.len() {
            return Err(mismatch("adam: parameter list changed between steps"));
        }
        self.step += 1;
        for (param, state) in params.iter_mut().zip(&mut self.moments) {
            let (data, grad) = param.data_and_grad_mut();
            adam_step(data, grad, state, self.step, &self.config)?;
        }
        Ok(())
    }
}
