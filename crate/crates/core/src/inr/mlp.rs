//! Fully connected network mapping encoded features to one complex value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One affine layer; `weights` is `out_dim × in_dim`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    #[inline]
    fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.in_dim..(j + 1) * self.in_dim]
    }
}

/// Layers with ReLU between them and a linear 2-wide output (Re, Im).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl MlpParams {
    /// Zero network with the given layer widths, input first and `2` last.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid(
                "an MLP needs at least input and output widths",
            ));
        }
        if widths.contains(&0) {
            return Err(Error::invalid(format!(
                "MLP widths must be positive: {widths:?}"
            )));
        }
        if *widths.last().unwrap() != 2 {
            return Err(Error::invalid(format!(
                "MLP output width must be 2, got {}",
                widths.last().unwrap()
            )));
        }
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(|l| l.in_dim).collect();
        w.push(self.layers.last().map_or(0, |l| l.out_dim));
        w
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Checks that layer shapes chain and end in width 2, and that all values
    /// are finite.
    pub fn validate(&self) -> Result<()> {
        let last = self
            .layers
            .last()
            .ok_or_else(|| Error::invalid("MLP has no layers"))?;
        if last.out_dim != 2 {
            return Err(Error::invalid(format!(
                "MLP output width must be 2, got {}",
                last.out_dim
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.biases.len() != layer.out_dim
            {
                return Err(Error::invalid(format!(
                    "layer {k} storage does not match its shape"
                )));
            }
            if k > 0 && self.layers[k - 1].out_dim != layer.in_dim {
                return Err(Error::invalid(format!(
                    "layer {k} expects {} inputs but layer {} produces {}",
                    layer.in_dim,
                    k - 1,
                    self.layers[k - 1].out_dim
                )));
            }
            if !layer
                .weights
                .iter()
                .chain(&layer.biases)
                .all(|v| v.is_finite())
            {
                return Err(Error::invalid(format!(
                    "layer {k} has non-finite parameters"
                )));
            }
        }
        Ok(())
    }

    /// Length of the activation buffer used by [`MlpParams::forward_into`]:
    /// the inputs of every layer, concatenated.
    pub(crate) fn activation_len(&self) -> usize {
        self.layers.iter().map(|l| l.in_dim).sum()
    }

    /// Forward pass. `acts` must start with the input features and have length
    /// [`activation_len`](Self::activation_len); hidden activations are
    /// written after them.
    pub(crate) fn forward_into(&self, acts: &mut [f64]) -> [f64; 2] {
        let mut offset = 0;
        let last = self.layers.len() - 1;
        let mut out = [0.0; 2];
        for (k, layer) in self.layers.iter().enumerate() {
            let (head, tail) = acts.split_at_mut(offset + layer.in_dim);
            let input = &head[offset..];
            if k == last {
                for j in 0..2 {
                    out[j] = layer.biases[j] + dot(layer.row(j), input);
                }
            } else {
                for j in 0..layer.out_dim {
                    tail[j] = (layer.biases[j] + dot(layer.row(j), input)).max(0.0);
                }
            }
            offset += layer.in_dim;
        }
        out
    }

    /// Backward pass for one sample. Accumulates parameter gradients into
    /// `grads` and writes the feature gradient into `grad_features`.
    /// `delta` is scratch space of at least the widest layer.
    pub(crate) fn backward_into(
        &self,
        acts: &[f64],
        grad_out: [f64; 2],
        grads: &mut MlpParams,
        grad_features: &mut [f64],
        delta: &mut Vec<f64>,
        next: &mut Vec<f64>,
    ) {
        delta.clear();
        delta.extend_from_slice(&grad_out);
        let mut offset = acts.len();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            offset -= layer.in_dim;
            let input = &acts[offset..offset + layer.in_dim];
            next.clear();
            next.resize(layer.in_dim, 0.0);
            for j in 0..layer.out_dim {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                g.biases[j] += d;
                let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                let grow = &mut g.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    grow[i] += d * input[i];
                    next[i] += d * row[i];
                }
            }
            if k == 0 {
                grad_features.copy_from_slice(next);
            } else {
                // Input of layer k is ReLU output of layer k-1.
                for (n, &a) in next.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *n = 0.0;
                    }
                }
                std::mem::swap(delta, next);
            }
        }
    }
}

/// Activations recorded by [`mlp_forward`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpCache {
    acts: Vec<f64>,
}

pub fn mlp_forward(features: &[f64], mlp: &MlpParams) -> Result<([f64; 2], MlpCache)> {
    if features.len() != mlp.input_dim() {
        return Err(Error::invalid(format!(
            "expected {} features, got {}",
            mlp.input_dim(),
            features.len()
        )));
    }
    let mut acts = vec![0.0; mlp.activation_len()];
    acts[..features.len()].copy_from_slice(features);
    let out = mlp.forward_into(&mut acts);
    Ok((out, MlpCache { acts }))
}

/// Returns `(parameter gradient, feature gradient)` for one sample.
pub fn mlp_backward(
    cache: &MlpCache,
    mlp: &MlpParams,
    grad_out: [f64; 2],
) -> (MlpParams, Vec<f64>) {
    let mut grads = mlp.zeros_like();
    let mut grad_features = vec![0.0; mlp.input_dim()];
    mlp.backward_into(
        &cache.acts,
        grad_out,
        &mut grads,
        &mut grad_features,
        &mut Vec::new(),
        &mut Vec::new(),
    );
    (grads, grad_features)
}

impl MlpParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }
}
