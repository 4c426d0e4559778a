//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Batches are row-major `(batch, features)` matrices. Layer weights are
//! stored `(fan_in, fan_out)` so a forward pass is `x·W + b`.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static NEXT_PARAM_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_PARAM_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    /// `min(0, z)`: non-positive outputs for a value function of non-positive rewards.
    NegRelu,
    Identity,
}

/// `tanh(z) = 1 − 2/(e^{2z} + 1)`.
#[inline]
fn tanh(z: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * z).exp() + 1.0)
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(z),
            Activation::Relu => z.max(0.0),
            Activation::NegRelu => z.min(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the activation output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::NegRelu => {
                if z < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::NegRelu => "neg_relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "neg_relu" => Activation::NegRelu,
            "identity" => Activation::Identity,
            _ => return None,
        })
    }
}

/// Activation schedule of the actor's mean network.
pub const ACTOR_ACTIVATIONS: [Activation; 3] = [Activation::Tanh, Activation::Tanh, Activation::Relu];
/// Activation schedule of the critic.
pub const CRITIC_ACTIVATIONS: [Activation; 3] = [Activation::Tanh, Activation::Tanh, Activation::NegRelu];

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `(fan_in, fan_out)`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// Weights, biases and activation schedule of a perceptron.
#[derive(Debug, Clone)]
pub struct MlpParams {
    layers: Vec<Layer>,
    id: u64,
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Intermediate values of a forward pass, consumed by [`MlpParams::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    param_id: u64,
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("network has at least one layer")
    }
}

/// Parameter gradients with the same layout as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl MlpParams {
    /// Builds a network `input_dim → sizes[0] → … → sizes[last]` with uniform
    /// ±1/√fan_in initialization of weights and biases.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.is_empty() || sizes.len() != activations.len() {
            return Err(Error::Config(format!(
                "{} layer sizes but {} activations",
                sizes.len(),
                activations.len()
            )));
        }
        if input_dim == 0 || sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len());
        let mut fan_in = input_dim;
        for (&fan_out, &activation) in sizes.iter().zip(activations) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound));
            let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..=bound));
            layers.push(Layer {
                weights,
                bias,
                activation,
            });
            fan_in = fan_out;
        }
        Ok(Self { layers, id: fresh_id() })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].fan_out(),
                    actual: pair[1].fan_in(),
                    context: "consecutive layer sizes",
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.fan_out() {
                return Err(Error::DimensionMismatch {
                    expected: l.fan_out(),
                    actual: l.bias.len(),
                    context: "bias length",
                });
            }
        }
        Ok(Self { layers, id: fresh_id() })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Sets every bias of the output layer to `value`.
    pub fn set_output_bias(&mut self, value: f64) {
        let last = self.layers.len() - 1;
        self.layers[last].bias.fill(value);
        self.id = fresh_id();
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: cols,
                context: "network input",
            });
        }
        Ok(())
    }

    /// Forward pass keeping the intermediates needed for backpropagation.
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(input.ncols())?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = post.last().map(|p| p.view()).unwrap_or(input);
            let mut z = x.dot(&layer.weights);
            z += &layer.bias;
            let act = layer.activation;
            let y = z.mapv(|v| act.apply(v));
            pre.push(z);
            post.push(y);
        }
        let cache = ForwardCache {
            param_id: self.id,
            input: input.to_owned(),
            pre,
            post,
        };
        Ok((cache.output().clone(), cache))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        let mut x = input.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            x = x.dot(&layer.weights);
            x += &layer.bias;
            x.mapv_inplace(|v| act.apply(v));
        }
        Ok(x)
    }

    /// Single-sample convenience wrapper around [`MlpParams::predict`].
    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::NumericDomain(e.to_string()))?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Gradients of `Σ grad_output ⊙ output` w.r.t. parameters and input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        if cache.param_id != self.id {
            return Err(Error::StaleCache);
        }
        let out = cache.output();
        if grad_output.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                actual: grad_output.len(),
                context: "output gradient",
            });
        }
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut upstream = grad_output.to_owned();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let act = layer.activation;
            let mut dz = upstream;
            ndarray::Zip::from(&mut dz)
                .and(&cache.pre[l])
                .and(&cache.post[l])
                .for_each(|d, &z, &y| *d *= act.derivative(z, y));
            let x = if l == 0 {
                cache.input.view()
            } else {
                cache.post[l - 1].view()
            };
            weights.push(x.t().dot(&dz));
            biases.push(dz.sum_axis(Axis(0)));
            upstream = dz.dot(&layer.weights.t());
        }
        weights.reverse();
        biases.reverse();
        Ok((MlpGrads { weights, biases }, upstream))
    }

    fn check_grads(&self, grads: &MlpGrads) -> Result<()> {
        if grads.weights.len() != self.layers.len() || grads.biases.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                actual: grads.weights.len(),
                context: "gradient layer count",
            });
        }
        for (l, (w, b)) in self.layers.iter().zip(grads.weights.iter().zip(&grads.biases)) {
            if w.dim() != l.weights.dim() || b.len() != l.bias.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.weights.len() + l.bias.len(),
                    actual: w.len() + b.len(),
                    context: "gradient shape",
                });
            }
        }
        Ok(())
    }

    /// `θ ← θ + lr·g`. Pass a negative rate to descend.
    pub fn sgd_ascend(&mut self, grads: &MlpGrads, lr: f64) -> Result<()> {
        self.check_grads(grads)?;
        for (layer, (w, b)) in self.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            layer.weights.scaled_add(lr, w);
            layer.bias.scaled_add(lr, b);
        }
        self.id = fresh_id();
        Ok(())
    }

    /// Polyak averaging `self ← (1 − τ)·self + τ·source`.
    pub fn soft_update(&mut self, source: &MlpParams, tau: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::ParameterDomain(format!("tau must lie in [0, 1], got {tau}")));
        }
        if self.layers.len() != source.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                actual: source.layers.len(),
                context: "soft update layer count",
            });
        }
        for (t, s) in self.layers.iter().zip(&source.layers) {
            if t.weights.dim() != s.weights.dim() || t.bias.len() != s.bias.len() {
                return Err(Error::DimensionMismatch {
                    expected: t.weights.len(),
                    actual: s.weights.len(),
                    context: "soft update layer shape",
                });
            }
        }
        if tau == 1.0 {
            for (t, s) in self.layers.iter_mut().zip(&source.layers) {
                t.weights.assign(&s.weights);
                t.bias.assign(&s.bias);
            }
        } else if tau > 0.0 {
            for (t, s) in self.layers.iter_mut().zip(&source.layers) {
                ndarray::Zip::from(&mut t.weights)
                    .and(&s.weights)
                    .for_each(|a, &b| *a = (1.0 - tau) * *a + tau * b);
                ndarray::Zip::from(&mut t.bias)
                    .and(&s.bias)
                    .for_each(|a, &b| *a = (1.0 - tau) * *a + tau * b);
            }
        }
        self.id = fresh_id();
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    /// Parameters in layer order, each layer as row-major weights followed by bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: values.len(),
                context: "flat parameter vector",
            });
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = it.next().expect("length checked");
            }
            for b in l.bias.iter_mut() {
                *b = it.next().expect("length checked");
            }
        }
        self.id = fresh_id();
        Ok(())
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.layers.iter().map(|l| Array2::zeros(l.weights.dim())).collect(),
            biases: self.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }
}

/// Adam moment estimates for one network (optional alternative to plain gradient steps).
#[derive(Debug, Clone)]
pub struct AdamState {
    m: MlpGrads,
    v: MlpGrads,
    t: i32,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        Self {
            m: params.zero_grads(),
            v: params.zero_grads(),
            t: 0,
        }
    }

    /// Converts a raw gradient into the bias-corrected Adam direction, in place.
    pub fn direction(&mut self, grads: &mut MlpGrads) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let pairs = self
            .m
            .weights
            .iter_mut()
            .zip(self.v.weights.iter_mut())
            .zip(grads.weights.iter_mut());
        for ((m, v), g) in pairs {
            ndarray::Zip::from(m)
                .and(v)
                .and(g)
                .for_each(|m, v, g| adam_scalar(m, v, g, c1, c2));
        }
        let pairs = self
            .m
            .biases
            .iter_mut()
            .zip(self.v.biases.iter_mut())
            .zip(grads.biases.iter_mut());
        for ((m, v), g) in pairs {
            ndarray::Zip::from(m)
                .and(v)
                .and(g)
                .for_each(|m, v, g| adam_scalar(m, v, g, c1, c2));
        }
    }
}

/// Adam update of a single scalar moment pair; overwrites `g` with the step direction.
pub fn adam_scalar(m: &mut f64, v: &mut f64, g: &mut f64, c1: f64, c2: f64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * *g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * *g * *g;
    *g = (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
}
