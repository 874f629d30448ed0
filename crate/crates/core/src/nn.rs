//! A small actor-critic network with hand-written gradients.
//!
//! Layout: `input -> tanh(64) -> tanh(64)`, then two linear heads on the
//! shared trunk: action logits and a scalar state value. All parameters live
//! in one flat `Vec<f64>` so the optimizer and checkpoints can treat them as a
//! single buffer; [`Layer`] records where each weight matrix and bias vector
//! sits inside it. Weight matrices are row-major `[outputs][inputs]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, Rng};

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("expected input of length {expected}, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("expected {expected} logit gradients, got {got}")]
    OutputLength { expected: usize, got: usize },
    #[error("parameter buffer has {got} entries, layout needs {expected}")]
    ParameterCount { expected: usize, got: usize },
    #[error("invalid network sizes: {0}")]
    InvalidSizes(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSizes {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

impl MlpSizes {
    pub fn new(input: usize, actions: usize) -> Self {
        Self {
            input,
            hidden: DEFAULT_HIDDEN.to_vec(),
            actions,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input == 0 || self.actions == 0 {
            return Err(NnError::InvalidSizes(
                "input and action counts must be positive".into(),
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(NnError::InvalidSizes(
                "need at least one non-empty hidden layer".into(),
            ));
        }
        Ok(())
    }
}

/// Position of one dense layer inside the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: usize,
    pub bias: usize,
}

impl Layer {
    fn end(&self) -> usize {
        self.bias + self.outputs
    }

    /// `out = W x + b`.
    fn apply(&self, params: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &params[self.weights..self.weights + self.inputs * self.outputs];
        let b = &params[self.bias..self.bias + self.outputs];
        for (row, bias) in w.chunks_exact(self.inputs).zip(b) {
            out.push(bias + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>());
        }
    }

    /// Accumulates parameter gradients for upstream `dout` and writes the
    /// input gradient into `dx` (when given).
    fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        dout: &[f64],
        grads: &mut [f64],
        dx: Option<&mut Vec<f64>>,
    ) {
        for (o, &g) in dout.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = self.weights + o * self.inputs;
            for (gw, &xi) in grads[row..row + self.inputs].iter_mut().zip(x) {
                *gw += g * xi;
            }
            grads[self.bias + o] += g;
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.resize(self.inputs, 0.0);
            let w = &params[self.weights..self.weights + self.inputs * self.outputs];
            for (row, &g) in w.chunks_exact(self.inputs).zip(dout) {
                for (d, &wi) in dx.iter_mut().zip(row) {
                    *d += g * wi;
                }
            }
        }
    }
}

fn layout(sizes: &MlpSizes) -> (Vec<Layer>, Layer, Layer, usize) {
    let mut offset = 0;
    let mut dense = |inputs: usize, outputs: usize| {
        let layer = Layer {
            inputs,
            outputs,
            weights: offset,
            bias: offset + inputs * outputs,
        };
        offset = layer.end();
        layer
    };
    let mut trunk = Vec::with_capacity(sizes.hidden.len());
    let mut previous = sizes.input;
    for &h in &sizes.hidden {
        trunk.push(dense(previous, h));
        previous = h;
    }
    let policy = dense(previous, sizes.actions);
    let value = dense(previous, 1);
    (trunk, policy, value, offset)
}

/// Shared-trunk actor-critic multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: MlpSizes,
    trunk: Vec<Layer>,
    policy: Layer,
    value: Layer,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// `activations[0]` is the input, then one entry per hidden layer.
    pub activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub value: f64,
}

/// Gradient buffer congruent with [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(pub Vec<f64>);

impl GradientSet {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        GradientSet(vec![0.0; mlp.params.len()])
    }

    pub fn clear(&mut self) {
        self.0.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the norm
    /// before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

impl Mlp {
    /// Glorot-uniform weights (`bound = sqrt(6 / (fan_in + fan_out))`), zero
    /// biases. Deterministic in `seed`.
    pub fn init(sizes: MlpSizes, seed: u64) -> Result<Self, NnError> {
        sizes.validate()?;
        let (trunk, policy, value, count) = layout(&sizes);
        let mut params = vec![0.0; count];
        let mut rng = Rng::new(derive_seed(seed, "init"));
        for layer in trunk.iter().chain([&policy, &value]) {
            let bound = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut params[layer.weights..layer.bias] {
                *w = rng.range_f64(-bound, bound);
            }
        }
        Ok(Self {
            sizes,
            trunk,
            policy,
            value,
            params,
        })
    }

    pub fn from_params(sizes: MlpSizes, params: Vec<f64>) -> Result<Self, NnError> {
        sizes.validate()?;
        let (trunk, policy, value, count) = layout(&sizes);
        if params.len() != count {
            return Err(NnError::ParameterCount {
                expected: count,
                got: params.len(),
            });
        }
        if let Some(bad) = params.iter().position(|p| !p.is_finite()) {
            return Err(NnError::InvalidSizes(format!("parameter {bad} is not finite")));
        }
        Ok(Self {
            sizes,
            trunk,
            policy,
            value,
            params,
        })
    }

    pub fn sizes(&self) -> &MlpSizes {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn trunk_layers(&self) -> &[Layer] {
        &self.trunk
    }

    pub fn policy_layer(&self) -> Layer {
        self.policy
    }

    pub fn value_layer(&self) -> Layer {
        self.value
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache, NnError> {
        if input.len() != self.sizes.input {
            return Err(NnError::InputLength {
                expected: self.sizes.input,
                got: input.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.trunk {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&self.params, activations.last().unwrap(), &mut out);
            out.iter_mut().for_each(|z| *z = z.tanh());
            activations.push(out);
        }
        let top = activations.last().unwrap();
        let mut logits = Vec::with_capacity(self.sizes.actions);
        self.policy.apply(&self.params, top, &mut logits);
        let mut value = Vec::with_capacity(1);
        self.value.apply(&self.params, top, &mut value);
        Ok(ForwardCache {
            activations,
            logits,
            value: value[0],
        })
    }

    /// Adds the gradient of `sum_j dlogits[j] * logits[j] + dvalue * value`
    /// with respect to every parameter into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        dlogits: &[f64],
        dvalue: f64,
        grads: &mut GradientSet,
    ) -> Result<(), NnError> {
        if dlogits.len() != self.sizes.actions {
            return Err(NnError::OutputLength {
                expected: self.sizes.actions,
                got: dlogits.len(),
            });
        }
        if grads.0.len() != self.params.len() {
            return Err(NnError::ParameterCount {
                expected: self.params.len(),
                got: grads.0.len(),
            });
        }
        let top = cache.activations.last().unwrap();
        let mut dtop = Vec::new();
        self.policy
            .backward(&self.params, top, dlogits, &mut grads.0, Some(&mut dtop));
        let mut dvalue_in = Vec::new();
        self.value
            .backward(&self.params, top, &[dvalue], &mut grads.0, Some(&mut dvalue_in));
        for (d, v) in dtop.iter_mut().zip(&dvalue_in) {
            *d += v;
        }

        let mut dh = dtop;
        let mut dx = Vec::new();
        for (i, layer) in self.trunk.iter().enumerate().rev() {
            let h = &cache.activations[i + 1];
            let dz: Vec<f64> = dh.iter().zip(h).map(|(d, h)| d * (1.0 - h * h)).collect();
            let wants_input = i > 0;
            layer.backward(
                &self.params,
                &cache.activations[i],
                &dz,
                &mut grads.0,
                wants_input.then_some(&mut dx),
            );
            if wants_input {
                std::mem::swap(&mut dh, &mut dx);
            }
        }
        Ok(())
    }

    pub fn backward(
        &self,
        cache: &ForwardCache,
        dlogits: &[f64],
        dvalue: f64,
    ) -> Result<GradientSet, NnError> {
        let mut grads = GradientSet::zeros_like(self);
        self.backward_into(cache, dlogits, dvalue, &mut grads)?;
        Ok(grads)
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - log_total).collect()
}

pub fn log_prob(logits: &[f64], action: usize) -> f64 {
    log_softmax(logits)[action]
}

pub fn entropy(logits: &[f64]) -> f64 {
    let log_p = log_softmax(logits);
    -log_p.iter().map(|lp| lp.exp() * lp).sum::<f64>()
}

/// Inverse-CDF draw from the softmax of `logits`. Returns the action index and
/// its log-probability.
pub fn categorical_sample(logits: &[f64], rng: &mut Rng) -> (usize, f64) {
    let probs = softmax(logits);
    let u = rng.next_f64();
    let mut cumulative = 0.0;
    let mut chosen = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            chosen = i;
            break;
        }
    }
    (chosen, log_prob(logits, chosen))
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one parameter buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, parameter_count: usize) -> Self {
        Self {
            config,
            step: 0,
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
        }
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [f64], grads: &GradientSet) -> Result<(), NnError> {
        if params.len() != self.first_moment.len() || grads.0.len() != params.len() {
            return Err(NnError::ParameterCount {
                expected: self.first_moment.len(),
                got: grads.0.len().min(params.len()),
            });
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(&grads.0)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// On-disk form of a network plus its optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub sizes: MlpSizes,
    pub params: Vec<f64>,
    pub optimizer: OptimizerState,
}

impl NetworkSnapshot {
    pub fn capture(mlp: &Mlp, optimizer: &OptimizerState) -> Self {
        Self {
            sizes: mlp.sizes.clone(),
            params: mlp.params.clone(),
            optimizer: optimizer.clone(),
        }
    }

    pub fn restore(&self) -> Result<(Mlp, OptimizerState), NnError> {
        let mlp = Mlp::from_params(self.sizes.clone(), self.params.clone())?;
        if self.optimizer.first_moment.len() != mlp.params.len()
            || self.optimizer.second_moment.len() != mlp.params.len()
        {
            return Err(NnError::ParameterCount {
                expected: mlp.params.len(),
                got: self.optimizer.first_moment.len(),
            });
        }
        Ok((mlp, self.optimizer.clone()))
    }
}
