use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::neural::argmax;

/// Linear decay from `start` to `end` over `decay_steps` gradient steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, decay_steps: 10_000 }
    }
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self { start: eps, end: eps, decay_steps: 0 }
    }

    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Uniform random action with probability `epsilon`, otherwise the argmax
/// (lowest index on ties).
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}
