//! Small dense networks with hand-written backpropagation.
//!
//! Everything is `f64`. Gradients come back as a value of the same type as
//! the parameters, so accumulation and the optimizer work through the
//! [`ParamSet`] slice view without caring about the architecture.

mod adam;
mod dueling;
mod matrix;
mod mlp;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use dueling::{DuelingCache, DuelingNet};
pub use matrix::Matrix;
pub use mlp::{Activation, Layer, Mlp, MlpCache};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("io: {0}")]
    Io(String),
}

/// A parameter container viewed as an ordered list of flat slices.
pub trait ParamSet: Clone {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for s in z.slices_mut() {
            s.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), NeuralError> {
        let a = self.slices();
        let b = other.slices();
        if a.len() != b.len() {
            return Err(NeuralError::ShapeMismatch { what: "parameter blocks", expected: a.len(), got: b.len() });
        }
        for (x, y) in a.iter().zip(&b) {
            if x.len() != y.len() {
                return Err(NeuralError::ShapeMismatch { what: "parameter block", expected: x.len(), got: y.len() });
            }
        }
        Ok(())
    }

    /// `self += k * other`.
    fn add_scaled(&mut self, other: &Self, k: f64) -> Result<(), NeuralError> {
        self.check_same_shape(other)?;
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += k * y;
            }
        }
        Ok(())
    }

    fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            for x in s.iter_mut() {
                *x *= k;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Natural log of the softmax, computed without forming tiny probabilities.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Any network the agents use, tagged by architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum Network {
    Mlp(Mlp),
    Dueling(DuelingNet),
}

impl Network {
    pub fn check(&self) -> Result<(), NeuralError> {
        match self {
            Network::Mlp(m) => m.check(),
            Network::Dueling(d) => d.check(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Network::Mlp(m) => m.input_dim(),
            Network::Dueling(d) => d.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Network::Mlp(m) => m.output_dim(),
            Network::Dueling(d) => d.n_actions(),
        }
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        match self {
            Network::Mlp(m) => m.predict(input),
            Network::Dueling(d) => d.predict(input),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, NetworkCache), NeuralError> {
        match self {
            Network::Mlp(m) => m.forward(input).map(|(y, c)| (y, NetworkCache::Mlp(c))),
            Network::Dueling(d) => d.forward(input).map(|(y, c)| (y, NetworkCache::Dueling(c))),
        }
    }

    /// Parameter gradients (same architecture) and input gradient of `output . output_grad`.
    pub fn backward(&self, cache: &NetworkCache, output_grad: &[f64]) -> Result<(Network, Vec<f64>), NeuralError> {
        match (self, cache) {
            (Network::Mlp(m), NetworkCache::Mlp(c)) => m.backward(c, output_grad).map(|(g, dx)| (Network::Mlp(g), dx)),
            (Network::Dueling(d), NetworkCache::Dueling(c)) => d.backward(c, output_grad).map(|(g, dx)| (Network::Dueling(g), dx)),
            _ => Err(NeuralError::InvalidArchitecture("cache from a different architecture".into())),
        }
    }

    pub fn architecture(&self) -> &'static str {
        match self {
            Network::Mlp(_) => "mlp",
            Network::Dueling(_) => "dueling",
        }
    }
}

#[derive(Debug, Clone)]
pub enum NetworkCache {
    Mlp(MlpCache),
    Dueling(DuelingCache),
}

impl ParamSet for Network {
    fn slices(&self) -> Vec<&[f64]> {
        match self {
            Network::Mlp(m) => m.slices(),
            Network::Dueling(d) => d.slices(),
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Network::Mlp(m) => m.slices_mut(),
            Network::Dueling(d) => d.slices_mut(),
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), NeuralError> {
        match (self, other) {
            (Network::Mlp(_), Network::Mlp(_)) | (Network::Dueling(_), Network::Dueling(_)) => {}
            _ => return Err(NeuralError::InvalidArchitecture("architecture tags differ".into())),
        }
        let a = self.slices();
        let b = other.slices();
        if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.len() != y.len()) {
            return Err(NeuralError::ShapeMismatch { what: "network parameters", expected: self.num_params(), got: other.num_params() });
        }
        Ok(())
    }
}

/// Versioned on-disk form of a single network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub network: Network,
}

impl NetworkCheckpoint {
    pub fn new(network: Network) -> Self {
        Self { format_version: CHECKPOINT_VERSION, network }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let ck: Self = serde_json::from_str(text).map_err(|e| NeuralError::InvalidCheckpoint(e.to_string()))?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(NeuralError::InvalidCheckpoint(format!("unsupported format_version {}", ck.format_version)));
        }
        ck.network.check()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_json()).map_err(|e| NeuralError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path).map_err(|e| NeuralError::Io(e.to_string()))?;
        Self::from_json(&text)
    }
}
