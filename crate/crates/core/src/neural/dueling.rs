use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Mlp, MlpCache, NeuralError, ParamSet};

/// Shared trunk feeding a scalar value head and a per-action advantage head,
/// combined as `q = V + (A - mean(A))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelingNet {
    pub trunk: Mlp,
    pub value_head: Mlp,
    pub advantage_head: Mlp,
}

#[derive(Debug, Clone)]
pub struct DuelingCache {
    trunk: MlpCache,
    value: MlpCache,
    advantage: MlpCache,
}

impl DuelingCache {
    pub fn value(&self) -> f64 {
        self.value.output()[0]
    }

    pub fn advantages(&self) -> &[f64] {
        self.advantage.output()
    }
}

impl DuelingNet {
    /// `trunk_sizes` includes the input; each head gets one hidden layer of `head_hidden`.
    pub fn new<R: Rng + ?Sized>(trunk_sizes: &[usize], head_hidden: usize, n_actions: usize, rng: &mut R) -> Self {
        let width = *trunk_sizes.last().expect("trunk sizes");
        Self {
            trunk: Mlp::new(trunk_sizes, Activation::Tanh, rng),
            value_head: Mlp::new(&[width, head_hidden, 1], Activation::Identity, rng),
            advantage_head: Mlp::new(&[width, head_hidden, n_actions], Activation::Identity, rng),
        }
    }

    pub fn from_parts(trunk: Mlp, value_head: Mlp, advantage_head: Mlp) -> Result<Self, NeuralError> {
        let net = Self { trunk, value_head, advantage_head };
        net.check()?;
        Ok(net)
    }

    pub(crate) fn check(&self) -> Result<(), NeuralError> {
        self.trunk.check()?;
        self.value_head.check()?;
        self.advantage_head.check()?;
        let width = self.trunk.output_dim();
        for head in [&self.value_head, &self.advantage_head] {
            if head.input_dim() != width {
                return Err(NeuralError::ShapeMismatch { what: "head input", expected: width, got: head.input_dim() });
            }
        }
        if self.value_head.output_dim() != 1 {
            return Err(NeuralError::ShapeMismatch { what: "value head output", expected: 1, got: self.value_head.output_dim() });
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.advantage_head.output_dim()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, DuelingCache), NeuralError> {
        let (h, trunk) = self.trunk.forward(input)?;
        let (v, value) = self.value_head.forward(&h)?;
        let (a, advantage) = self.advantage_head.forward(&h)?;
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        let q = a.iter().map(|ai| v[0] + (ai - mean)).collect();
        Ok((q, DuelingCache { trunk, value, advantage }))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.forward(input).map(|(q, _)| q)
    }

    /// Gradients of `q . q_grad` through both heads and the shared trunk.
    pub fn backward(&self, cache: &DuelingCache, q_grad: &[f64]) -> Result<(DuelingNet, Vec<f64>), NeuralError> {
        if q_grad.len() != self.n_actions() {
            return Err(NeuralError::ShapeMismatch { what: "q gradient", expected: self.n_actions(), got: q_grad.len() });
        }
        let total: f64 = q_grad.iter().sum();
        let mean = total / q_grad.len() as f64;
        let adv_grad: Vec<f64> = q_grad.iter().map(|g| g - mean).collect();
        let (g_value, dh_v) = self.value_head.backward(&cache.value, &[total])?;
        let (g_adv, dh_a) = self.advantage_head.backward(&cache.advantage, &adv_grad)?;
        let dh: Vec<f64> = dh_v.iter().zip(&dh_a).map(|(a, b)| a + b).collect();
        let (g_trunk, dx) = self.trunk.backward(&cache.trunk, &dh)?;
        Ok((DuelingNet { trunk: g_trunk, value_head: g_value, advantage_head: g_adv }, dx))
    }
}

impl ParamSet for DuelingNet {
    fn slices(&self) -> Vec<&[f64]> {
        let mut s = self.trunk.slices();
        s.extend(self.value_head.slices());
        s.extend(self.advantage_head.slices());
        s
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.trunk.slices_mut();
        s.extend(self.value_head.slices_mut());
        s.extend(self.advantage_head.slices_mut());
        s
    }
}
