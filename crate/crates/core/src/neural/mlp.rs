use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, NeuralError, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out x in`.
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Dense feed-forward network: tanh on hidden layers, `output_activation` on
/// the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    output_activation: Activation,
}

/// Per-layer inputs and activation outputs recorded by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect();
                Layer {
                    weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized"),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers, output_activation }
    }

    /// Builds from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Layer>, output_activation: Activation) -> Result<Self, NeuralError> {
        let mlp = Self { layers, output_activation };
        mlp.check()?;
        Ok(mlp)
    }

    pub(crate) fn check(&self) -> Result<(), NeuralError> {
        if self.layers.is_empty() {
            return Err(NeuralError::InvalidArchitecture("no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.biases.len() != l.out_dim() {
                return Err(NeuralError::ShapeMismatch { what: "bias vector", expected: l.out_dim(), got: l.biases.len() });
            }
            if l.weights.data().len() != l.in_dim() * l.out_dim() {
                return Err(NeuralError::ShapeMismatch { what: "weight matrix", expected: l.in_dim() * l.out_dim(), got: l.weights.data().len() });
            }
            if i > 0 && self.layers[i - 1].out_dim() != l.in_dim() {
                return Err(NeuralError::ShapeMismatch { what: "layer chain", expected: self.layers[i - 1].out_dim(), got: l.in_dim() });
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer sizes, input first.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Layer::out_dim)).collect()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            Activation::Tanh
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, MlpCache), NeuralError> {
        if input.len() != self.input_dim() {
            return Err(NeuralError::ShapeMismatch { what: "network input", expected: self.input_dim(), got: input.len() });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut a = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation(i);
            let out: Vec<f64> = layer.weights.affine(&a, &layer.biases).into_iter().map(|z| act.apply(z)).collect();
            inputs.push(std::mem::replace(&mut a, out.clone()));
            outputs.push(out);
        }
        Ok((a, MlpCache { inputs, outputs }))
    }

    /// Output only.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.forward(input).map(|(y, _)| y)
    }

    /// Reverse-mode gradients of `output . output_grad` with respect to every
    /// parameter (returned in a network of the same shape) and to the input.
    pub fn backward(&self, cache: &MlpCache, output_grad: &[f64]) -> Result<(Mlp, Vec<f64>), NeuralError> {
        if cache.inputs.len() != self.layers.len() || cache.inputs[0].len() != self.input_dim() {
            return Err(NeuralError::ShapeMismatch { what: "forward cache", expected: self.layers.len(), got: cache.inputs.len() });
        }
        if output_grad.len() != self.output_dim() {
            return Err(NeuralError::ShapeMismatch { what: "output gradient", expected: self.output_dim(), got: output_grad.len() });
        }
        let mut grads = self.zeros_like();
        let mut delta = output_grad.to_vec();
        for i in (0..self.layers.len()).rev() {
            let act = self.activation(i);
            for (d, &a) in delta.iter_mut().zip(&cache.outputs[i]) {
                *d *= act.derivative_from_output(a);
            }
            let g = &mut grads.layers[i];
            g.weights.add_outer(&delta, &cache.inputs[i]);
            for (b, d) in g.biases.iter_mut().zip(&delta) {
                *b += d;
            }
            delta = self.layers[i].weights.transpose_mul(&delta);
        }
        Ok((grads, delta))
    }
}

impl ParamSet for Mlp {
    fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.data(), l.biases.as_slice()]).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.data_mut(), l.biases.as_mut_slice()])
            .collect()
    }
}
