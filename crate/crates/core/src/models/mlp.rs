//! Dense feed-forward network with a flat f64 parameter buffer.
//!
//! Parameters for layer `l` are stored contiguously as the `out×in` weight
//! matrix (row-major) followed by the `out` bias vector, layers in order.
//! Gradients use the same layout, so optimizers and checkpoints work on
//! plain slices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            input,
            output,
            activation,
        }
    }

    fn num_params(&self) -> usize {
        self.output * (self.input + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Intermediate values from a forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input")
    }
}

/// Row-major weights (one row per output unit), biases and activation.
pub type LayerWeights = (Vec<Vec<f64>>, Vec<f64>, Activation);

impl MlpParams {
    /// Zero-initialized network.
    pub fn zeros(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output != pair[1].input {
                return Err(Error::DimMismatch {
                    expected: pair[0].output,
                    actual: pair[1].input,
                });
            }
        }
        if layers.iter().any(|l| l.input == 0 || l.output == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.num_params();
        }
        offsets.push(total);
        Ok(Self {
            layers,
            offsets,
            values: vec![0.0; total],
        })
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) initialization of weights and biases.
    pub fn init(layers: Vec<LayerSpec>, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(layers)?;
        for l in 0..p.layers.len() {
            let bound = 1.0 / (p.layers[l].input as f64).sqrt();
            let (start, end) = (p.offsets[l], p.offsets[l + 1]);
            for v in &mut p.values[start..end] {
                *v = rng.uniform_range(-bound, bound);
            }
        }
        Ok(p)
    }

    /// Two-layer binary classifier producing one logit.
    pub fn classifier(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        Self::init(
            vec![
                LayerSpec::new(input, hidden, Activation::Relu),
                LayerSpec::new(hidden, 1, Activation::Identity),
            ],
            rng,
        )
    }

    /// Two-layer head producing an `embed`-wide embedding.
    pub fn metric(input: usize, hidden: usize, embed: usize, rng: &mut Rng) -> Result<Self> {
        Self::init(
            vec![
                LayerSpec::new(input, hidden, Activation::Relu),
                LayerSpec::new(hidden, embed, Activation::Identity),
            ],
            rng,
        )
    }

    /// Two-layer head that starts as the identity map: the hidden layer holds
    /// the pairs relu(x) and relu(−x), which the output layer subtracts.
    pub fn identity_metric(input: usize) -> Result<Self> {
        let unit = |i: usize, sign: f64| {
            let mut row = vec![0.0; input];
            row[i] = sign;
            row
        };
        let w1: Vec<_> = (0..input).map(|i| unit(i, 1.0)).chain((0..input).map(|i| unit(i, -1.0))).collect();
        let w2: Vec<_> = (0..input)
            .map(|i| {
                let mut row = vec![0.0; 2 * input];
                row[i] = 1.0;
                row[input + i] = -1.0;
                row
            })
            .collect();
        Self::from_layers(&[
            (w1, vec![0.0; 2 * input], Activation::Relu),
            (w2, vec![0.0; input], Activation::Identity),
        ])
    }

    /// input → hidden → bottleneck → hidden → input.
    pub fn autoencoder(input: usize, hidden: usize, bottleneck: usize, rng: &mut Rng) -> Result<Self> {
        Self::init(
            vec![
                LayerSpec::new(input, hidden, Activation::Relu),
                LayerSpec::new(hidden, bottleneck, Activation::Identity),
                LayerSpec::new(bottleneck, hidden, Activation::Relu),
                LayerSpec::new(hidden, input, Activation::Identity),
            ],
            rng,
        )
    }

    /// Builds a network from explicit per-layer weights and biases.
    pub fn from_layers(layers: &[LayerWeights]) -> Result<Self> {
        let specs = layers
            .iter()
            .map(|(w, b, a)| {
                let input = w.first().map_or(0, |r| r.len());
                if w.len() != b.len() || w.iter().any(|r| r.len() != input) {
                    return Err(Error::InvalidInput("ragged layer weights".into()));
                }
                Ok(LayerSpec::new(input, w.len(), *a))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = Self::zeros(specs)?;
        for (l, (w, b, _)) in layers.iter().enumerate() {
            let flat: Vec<f64> = w.iter().flatten().copied().chain(b.iter().copied()).collect();
            let (s, e) = (p.offsets[l], p.offsets[l + 1]);
            p.values[s..e].copy_from_slice(&flat);
        }
        Ok(p)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::DimMismatch {
                expected: self.values.len(),
                actual: values.len(),
            });
        }
        self.values.copy_from_slice(values);
        Ok(())
    }

    fn weight(&self, l: usize) -> &[f64] {
        let s = self.offsets[l];
        &self.values[s..s + self.layers[l].input * self.layers[l].output]
    }

    fn bias(&self, l: usize) -> &[f64] {
        let s = self.offsets[l] + self.layers[l].input * self.layers[l].output;
        &self.values[s..self.offsets[l + 1]]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in 0..self.layers.len() {
            let spec = self.layers[l];
            let (w, b) = (self.weight(l), self.bias(l));
            a = (0..spec.output)
                .map(|o| {
                    let row = &w[o * spec.input..(o + 1) * spec.input];
                    let z = row.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>() + b[o];
                    spec.activation.apply(z)
                })
                .collect();
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        for l in 0..self.layers.len() {
            let spec = self.layers[l];
            let (w, b) = (self.weight(l), self.bias(l));
            let a = activations.last().unwrap();
            let z: Vec<f64> = (0..spec.output)
                .map(|o| {
                    let row = &w[o * spec.input..(o + 1) * spec.input];
                    row.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>() + b[o]
                })
                .collect();
            activations.push(z.iter().map(|&v| spec.activation.apply(v)).collect());
            pre_activations.push(z);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    /// Backpropagates `d_output` (dL/d output) and adds `scale`·dL/dθ into
    /// `grad`, which must have `num_params()` entries.
    pub fn backward_into(&self, cache: &ForwardCache, d_output: &[f64], scale: f64, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.values.len());
        let mut delta: Vec<f64> = d_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let spec = self.layers[l];
            let z = &cache.pre_activations[l];
            for (d, &zv) in delta.iter_mut().zip(z) {
                *d *= spec.activation.derivative(zv);
            }
            let a_in = &cache.activations[l];
            let s = self.offsets[l];
            let (gw, gb) = grad[s..self.offsets[l + 1]].split_at_mut(spec.input * spec.output);
            for o in 0..spec.output {
                let d = delta[o] * scale;
                if d != 0.0 {
                    let row = &mut gw[o * spec.input..(o + 1) * spec.input];
                    for (g, &a) in row.iter_mut().zip(a_in) {
                        *g += d * a;
                    }
                }
                gb[o] += d;
            }
            if l > 0 {
                let w = self.weight(l);
                let mut prev = vec![0.0; spec.input];
                for o in 0..spec.output {
                    let d = delta[o];
                    if d != 0.0 {
                        for (p, &wv) in prev.iter_mut().zip(&w[o * spec.input..(o + 1) * spec.input]) {
                            *p += d * wv;
                        }
                    }
                }
                delta = prev;
            }
        }
    }

    /// Smallest |pre-activation| of any relu unit on input `x`; small values
    /// mean finite differences may straddle a kink.
    pub fn min_relu_margin(&self, x: &[f64]) -> Result<f64> {
        let cache = self.forward_cached(x)?;
        Ok(self
            .layers
            .iter()
            .zip(&cache.pre_activations)
            .filter(|(s, _)| s.activation == Activation::Relu)
            .flat_map(|(_, z)| z.iter().map(|v| v.abs()))
            .fold(f64::INFINITY, f64::min))
    }
}
