//! Feedforward binary classifier with ReLU hidden layers and a sigmoid
//! output, with hand-written backpropagation for the binary cross-entropy
//! loss. Gradient correctness is guarded by a finite-difference check.

use crate::error::{Error, Result};
use crate::gbt::sigmoid;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense layer; `weights` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.biases[o];
            out.push(z);
        }
    }
}

/// Hidden layers use ReLU; the single output unit applies a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnModel {
    pub layers: Vec<Layer>,
}

impl FnnModel {
    /// Builds a net with the given layer sizes, e.g. `[4, 256, 256, 1]`,
    /// Xavier-uniform initialized.
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert_eq!(*dims.last().unwrap(), 1, "binary classifier has one output");
        let layers = dims
            .windows(2)
            .map(|d| {
                let (in_dim, out_dim) = (d[0], d[1]);
                let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
                Layer {
                    in_dim,
                    out_dim,
                    weights: (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
                    biases: vec![0.0; out_dim],
                }
            })
            .collect();
        FnnModel { layers }
    }

    pub fn zeroed(dims: &[usize]) -> Self {
        let layers = dims
            .windows(2)
            .map(|d| Layer {
                in_dim: d[0],
                out_dim: d[1],
                weights: vec![0.0; d[0] * d[1]],
                biases: vec![0.0; d[1]],
            })
            .collect();
        FnnModel { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    /// Forward pass keeping post-activation values per layer for backprop.
    fn forward_cached(&self, input: &[f64]) -> (f64, Vec<Vec<f64>>) {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        let mut z = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.apply(activations.last().unwrap(), &mut z);
            let is_output = k + 1 == self.layers.len();
            let a: Vec<f64> = if is_output {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            activations.push(a);
        }
        let prob = activations.last().unwrap()[0];
        (prob, activations)
    }

    /// Gradient of the binary cross-entropy at one example, same shapes as
    /// the model. Returns the predicted probability alongside.
    pub fn backprop(&self, input: &[f64], label: f64, grads: &mut FnnGradients) -> f64 {
        let (prob, acts) = self.forward_cached(input);
        // d(BCE)/d(z_out) for sigmoid output
        let mut delta = vec![prob - label];
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input_act = &acts[k];
            let g = &mut grads.layers[k];
            for o in 0..layer.out_dim {
                for i in 0..layer.in_dim {
                    g.weights[o * layer.in_dim + i] += delta[o] * input_act[i];
                }
                g.biases[o] += delta[o];
            }
            if k > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for i in 0..layer.in_dim {
                    let mut sum = 0.0;
                    for o in 0..layer.out_dim {
                        sum += delta[o] * layer.weights[o * layer.in_dim + i];
                    }
                    // ReLU derivative via the stored activation
                    prev[i] = if input_act[i] > 0.0 { sum } else { 0.0 };
                }
                delta = prev;
            }
        }
        prob
    }

    pub fn apply_step(&mut self, grads: &FnnGradients, scale: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= scale * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= scale * gb;
            }
        }
    }
}

/// Gradient accumulator mirroring the model shapes.
#[derive(Debug, Clone)]
pub struct FnnGradients {
    pub layers: Vec<Layer>,
}

impl FnnGradients {
    pub fn zeros_like(model: &FnnModel) -> Self {
        FnnGradients {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= factor);
            l.biases.iter_mut().for_each(|b| *b *= factor);
        }
    }
}

/// Probability that the edge belongs to the reference solution.
pub fn fnn_predict(model: &FnnModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "expected {} features, got {}",
            model.input_dim(),
            features.len()
        )));
    }
    Ok(model.forward_cached(features).0)
}

pub fn bce_loss(prob: f64, label: f64) -> f64 {
    let p = prob.clamp(1e-12, 1.0 - 1e-12);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}
