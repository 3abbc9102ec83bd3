use serde::{Deserialize, Serialize};

use super::{NeuralError, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment accumulators shaped like the parameters they update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<P> {
    pub config: AdamConfig,
    first: P,
    second: P,
    step: u64,
}

impl<P: ParamSet> AdamState<P> {
    pub fn new(params: &P, config: AdamConfig) -> Self {
        Self { config, first: params.zeros_like(), second: params.zeros_like(), step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` along `grads` (descent).
    pub fn step(&mut self, params: &mut P, grads: &P) -> Result<(), NeuralError> {
        params.check_same_shape(grads)?;
        params.check_same_shape(&self.first)?;
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let g = grads.slices();
        let m = self.first.slices_mut();
        let v = self.second.slices_mut();
        for (((p, g), m), v) in params.slices_mut().into_iter().zip(g).zip(m).zip(v) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
