//! Fully connected network with a scalar output, stored as one flat parameter
//! vector so that gradients and optimizer moments share its layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// Linear pass-through.
    None,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::None => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::None => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Offset of the `outputs x inputs` row-major weight block.
    pub weights_at: usize,
    /// Offset of the `outputs` bias block.
    pub biases_at: usize,
}

impl LayerShape {
    pub fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.weights_at..self.weights_at + self.inputs * self.outputs]
    }

    pub fn biases<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.biases_at..self.biases_at + self.outputs]
    }
}

/// Weights and biases of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerShape>,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    /// `values[0]` is the input, `values[i + 1]` the output of layer `i`.
    values: Vec<Vec<f64>>,
    /// Scratch for the back-propagated error.
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Mlp {
    /// Builds the layer layout for `sizes = [inputs, hidden..., 1]`;
    /// `activations` has one entry per non-input layer. Parameters are zero.
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::config(
                "nn.activations",
                format!(
                    "{} layer sizes need {} activations",
                    sizes.len(),
                    sizes.len().saturating_sub(1)
                ),
            ));
        }
        if sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(Error::config(
                "nn.hidden",
                "layer sizes must be > 0 with a single output",
            ));
        }
        let mut layers = Vec::with_capacity(activations.len());
        let mut at = 0;
        for (w, &activation) in sizes.windows(2).zip(activations) {
            let (inputs, outputs) = (w[0], w[1]);
            layers.push(LayerShape {
                inputs,
                outputs,
                activation,
                weights_at: at,
                biases_at: at + inputs * outputs,
            });
            at += inputs * outputs + outputs;
        }
        Ok(Self {
            layers,
            params: vec![0.0; at],
        })
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(sizes, activations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &mlp.layers {
            let limit = glorot_limit(l.inputs, l.outputs);
            for w in &mut mlp.params[l.weights_at..l.weights_at + l.inputs * l.outputs] {
                *w = rng.gen_range(-limit..=limit);
            }
        }
        Ok(mlp)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64]) -> f64 {
        let mut tape = Tape::default();
        self.forward_tape(input, &mut tape)
    }

    /// Forward pass recording every layer's output in `tape`.
    pub fn forward_tape(&self, input: &[f64], tape: &mut Tape) -> f64 {
        assert_eq!(input.len(), self.layers[0].inputs, "input width");
        tape.values.resize_with(self.layers.len() + 1, Vec::new);
        tape.values[0].clear();
        tape.values[0].extend_from_slice(input);
        for (i, l) in self.layers.iter().enumerate() {
            let (done, rest) = tape.values.split_at_mut(i + 1);
            let x = &done[i];
            let y = &mut rest[0];
            y.clear();
            let w = l.weights(&self.params);
            let b = l.biases(&self.params);
            for (row, &bias) in w.chunks_exact(l.inputs).zip(b) {
                let z = bias + dot(row, x);
                y.push(l.activation.apply(z));
            }
        }
        tape.values[self.layers.len()][0]
    }

    /// Accumulates `d_out * d(output)/d(params)` into `grad` (same layout as
    /// `params`), using the activations recorded by the last forward pass.
    pub fn backward(&self, tape: &mut Tape, d_out: f64, grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let Tape {
            values,
            delta,
            next_delta,
        } = tape;
        delta.clear();
        delta.push(d_out);
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &values[i];
            let y = &values[i + 1];
            // Error at the pre-activation.
            for (d, &yo) in delta.iter_mut().zip(y) {
                *d *= l.activation.derivative_from_output(yo);
            }
            let w = l.weights(&self.params);
            let (gw, gb) =
                grad[l.weights_at..l.biases_at + l.outputs].split_at_mut(l.inputs * l.outputs);
            for (b, &d) in gb.iter_mut().zip(delta.iter()) {
                *b += d;
            }
            for (gw_row, &d) in gw.chunks_exact_mut(l.inputs).zip(delta.iter()) {
                for (g, &xj) in gw_row.iter_mut().zip(x) {
                    *g += d * xj;
                }
            }
            if i == 0 {
                break;
            }
            next_delta.clear();
            next_delta.resize(l.inputs, 0.0);
            for (row, &d) in w.chunks_exact(l.inputs).zip(delta.iter()) {
                for (nd, &wj) in next_delta.iter_mut().zip(row) {
                    *nd += d * wj;
                }
            }
            std::mem::swap(delta, next_delta);
        }
    }
}

/// Dot product over four independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (a4, b4) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = a4
        .remainder()
        .iter()
        .zip(b4.remainder())
        .map(|(x, y)| x * y)
        .sum();
    let mut acc = [0.0; 4];
    for (x, y) in a4.zip(b4) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
