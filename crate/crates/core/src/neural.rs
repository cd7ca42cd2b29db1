//! Dense networks with hand-written reverse mode, Adam, softmax and Huber.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("forward cache is stale: network changed since the forward pass")]
    StaleCache,
    #[error("network must have at least one layer")]
    Empty,
    #[error("layer {index} takes {got} inputs but the previous layer emits {expected}")]
    Chain { index: usize, expected: usize, got: usize },
    #[error("non-finite parameter in layer {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu if z <= 0.0 => 0.0,
            _ => 1.0,
        }
    }
}

/// `y = act(W x + b)` with `W` stored row-major as `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    /// Weights and biases uniform in `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim, activation);
        for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *w = rng.random_range(-bound..=bound);
        }
        layer
    }

    pub fn from_parts(weights: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Result<Self, NeuralError> {
        let out_dim = biases.len();
        if weights.len() != out_dim {
            return Err(NeuralError::Dimension {
                expected: out_dim,
                got: weights.len(),
            });
        }
        let in_dim = weights.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(in_dim * out_dim);
        for row in &weights {
            if row.len() != in_dim {
                return Err(NeuralError::Dimension {
                    expected: in_dim,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights: flat,
            biases,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self, out: usize, input: usize) -> f64 {
        self.weights[out * self.in_dim + input]
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.in_dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn preactivation(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x))
            .collect()
    }
}

/// Per-layer parameter gradients plus the gradient w.r.t. the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    /// Parameter gradients in the order of [`Mlp::flat_params`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Values saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    version: u64,
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    preacts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    /// Bumped on every parameter write; caches from older versions are rejected.
    version: u64,
}

/// Equality of parameters; the cache version is bookkeeping.
impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NeuralError> {
        if layers.is_empty() {
            return Err(NeuralError::Empty);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(NeuralError::Chain {
                    index: i + 1,
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(NeuralError::NonFinite(i));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    /// ReLU on every hidden layer, identity on the output.
    pub fn uniform<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::uniform(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Self::new(layers).expect("sizes chain by construction")
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::zeros(sizes[i], sizes[i + 1], act)
            })
            .collect();
        Self::new(layers).expect("sizes chain by construction")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NeuralError> {
        if input.len() != self.input_dim() {
            return Err(NeuralError::Dimension {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let z = layer.preactivation(&x);
            let y = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut x, y));
            preacts.push(z);
        }
        Ok((
            x,
            ForwardCache {
                version: self.version,
                inputs,
                preacts,
            },
        ))
    }

    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Gradients, NeuralError> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, output_grad, &mut grads)?;
        Ok(grads)
    }

    /// Adds this sample's parameter gradients into `acc` and overwrites
    /// `acc.input` with the input gradient.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        acc: &mut Gradients,
    ) -> Result<(), NeuralError> {
        if cache.version != self.version || cache.preacts.len() != self.layers.len() {
            return Err(NeuralError::StaleCache);
        }
        if output_grad.len() != self.output_dim() {
            return Err(NeuralError::Dimension {
                expected: self.output_dim(),
                got: output_grad.len(),
            });
        }
        let mut upstream = output_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[i];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&cache.preacts[i])
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let gw = &mut acc.weights[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                acc.biases[i][o] += d;
                for (g, &xi) in gw[o * layer.in_dim..(o + 1) * layer.in_dim].iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            let mut down = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, &w) in down
                    .iter_mut()
                    .zip(&layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim])
                {
                    *g += d * w;
                }
            }
            upstream = down;
        }
        acc.input = upstream;
        Ok(())
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.num_params() {
            return Err(NeuralError::Dimension {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        self.version += 1;
        Ok(())
    }
}

/// Checkpoint representation of a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layers: Vec<LayerRecord>,
}

impl From<&Mlp> for MlpRecord {
    fn from(net: &Mlp) -> Self {
        MlpRecord {
            layers: net
                .layers
                .iter()
                .map(|l| LayerRecord {
                    weights: l.weight_rows(),
                    biases: l.biases.clone(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = NeuralError;

    fn try_from(record: MlpRecord) -> Result<Self, NeuralError> {
        let layers = record
            .layers
            .into_iter()
            .map(|l| DenseLayer::from_parts(l.weights, l.biases, l.activation))
            .collect::<Result<Vec<_>, _>>()?;
        Mlp::new(layers)
    }
}

/// Max-shifted softmax and the log-probability of `action`.
pub fn softmax_logprob(logits: &[f64], action: usize) -> (Vec<f64>, f64) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / sum).collect();
    let log_prob = logits[action] - max - sum.ln();
    (probs, log_prob)
}

pub fn huber(e: f64, delta: f64) -> f64 {
    if e.abs() < delta {
        0.5 * e * e
    } else {
        delta * (e.abs() - 0.5 * delta)
    }
}

/// `d huber(e) / d e`.
pub fn huber_grad(e: f64, delta: f64) -> f64 {
    if e.abs() < delta {
        e
    } else {
        delta * e.signum()
    }
}

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NeuralError::Dimension {
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
