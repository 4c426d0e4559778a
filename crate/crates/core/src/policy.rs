//! Gaussian actor with a state-independent standard deviation, and the
//! text checkpoint format for networks.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{Activation, ForwardCache, Layer, MlpGrads, MlpParams};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of `N(mean, exp(log_std)²)` at `u`.
pub fn gaussian_log_density(mean: f64, log_std: f64, u: f64) -> f64 {
    let z = (u - mean) / log_std.exp();
    -0.5 * z * z - log_std - LN_SQRT_2PI
}

/// Partial derivatives of [`gaussian_log_density`] w.r.t. `mean` and `log_std`.
pub fn gaussian_log_density_grad(mean: f64, log_std: f64, u: f64) -> (f64, f64) {
    let var = (2.0 * log_std).exp();
    let d = u - mean;
    (d / var, d * d / var - 1.0)
}

/// Differential entropy `½·ln(2πe·σ²)`.
pub fn gaussian_entropy(log_std: f64) -> f64 {
    0.5 + LN_SQRT_2PI + log_std
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: MlpParams,
    pub log_std: f64,
}

/// One stochastic action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySample {
    /// Clamped, non-negative action in normalized units.
    pub action: f64,
    pub mean: f64,
    /// Log-density of the (unclamped) Gaussian at `action`.
    pub logp: f64,
}

/// Gradient of a scalar objective w.r.t. the policy parameters.
#[derive(Debug, Clone)]
pub struct PolicyGrads {
    pub mean_net: MlpGrads,
    pub log_std: f64,
}

impl GaussianPolicy {
    pub fn new(mean_net: MlpParams, initial_std: f64) -> Result<Self> {
        if mean_net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: mean_net.output_dim(),
                context: "policy mean output",
            });
        }
        if !(initial_std.is_finite() && initial_std > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "initial std must be positive, got {initial_std}"
            )));
        }
        Ok(Self {
            mean_net,
            log_std: initial_std.ln(),
        })
    }

    pub fn std(&self) -> f64 {
        self.log_std.exp()
    }

    pub fn mean(&self, s: &[f64]) -> Result<f64> {
        Ok(self.mean_net.predict_one(s)?[0])
    }

    pub fn mean_batch(&self, s: ArrayView2<f64>) -> Result<(Array1<f64>, ForwardCache)> {
        let (out, cache) = self.mean_net.forward(s)?;
        Ok((out.column(0).to_owned(), cache))
    }

    /// Samples `mean + σ·z` and clamps it at zero.
    pub fn sample<R: Rng + ?Sized>(&self, s: &[f64], rng: &mut R) -> Result<PolicySample> {
        let mean = self.mean(s)?;
        let z: f64 = rng.sample(StandardNormal);
        let action = (mean + self.std() * z).max(0.0);
        Ok(PolicySample {
            action,
            mean,
            logp: gaussian_log_density(mean, self.log_std, action),
        })
    }

    pub fn logprob(&self, s: &[f64], u: f64) -> Result<f64> {
        Ok(gaussian_log_density(self.mean(s)?, self.log_std, u))
    }

    pub fn entropy(&self) -> f64 {
        gaussian_entropy(self.log_std)
    }

    /// Plain gradient step `θ ← θ + lr·g` on both the network and `log_std`.
    pub fn ascend(&mut self, grads: &PolicyGrads, lr: f64) -> Result<()> {
        self.mean_net.sgd_ascend(&grads.mean_net, lr)?;
        self.log_std += lr * grads.log_std;
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.log_std.is_finite() && self.mean_net.all_finite()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, encode_checkpoint(&self.mean_net, Some(self.log_std))).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (mean_net, log_std) = decode_checkpoint(&text)?;
        let log_std = log_std.ok_or_else(|| Error::Checkpoint("policy checkpoint lacks log_std".into()))?;
        Ok(Self { mean_net, log_std })
    }
}

const CHECKPOINT_MAGIC: &str = "tracking-ppo-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Serializes a network (and optional policy `log_std`) in the versioned text format.
///
/// ```text
/// tracking-ppo-checkpoint 1
/// log_std <f64 | none>
/// layers <count>
/// layer <fan_in> <fan_out> <activation>
/// <fan_in·fan_out weights, row-major, space separated>
/// <fan_out biases>
/// ...
/// ```
///
/// Values use Rust's shortest round-trip float formatting, so a save/load
/// cycle reproduces every parameter bit for bit.
pub fn encode_checkpoint(net: &MlpParams, log_std: Option<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    match log_std {
        Some(v) => {
            let _ = writeln!(out, "log_std {v:?}");
        }
        None => out.push_str("log_std none\n"),
    }
    let _ = writeln!(out, "layers {}", net.layers().len());
    for l in net.layers() {
        let _ = writeln!(out, "layer {} {} {}", l.fan_in(), l.fan_out(), l.activation.name());
        let row: Vec<String> = l.weights.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
        let row: Vec<String> = l.bias.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_checkpoint(text: &str) -> Result<(MlpParams, Option<f64>)> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err(bad("missing magic header"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let log_std_line = lines.next().ok_or_else(|| bad("missing log_std"))?;
    let log_std = match log_std_line.strip_prefix("log_std ") {
        Some("none") => None,
        Some(v) => Some(v.trim().parse::<f64>().map_err(|_| bad("bad log_std"))?),
        None => return Err(bad("missing log_std")),
    };
    let count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("layers "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("missing layer count"))?;
    let parse_row = |line: Option<&str>, expected: usize| -> Result<Vec<f64>> {
        let line = line.ok_or_else(|| bad("truncated file"))?;
        let vals: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|_| bad("unparsable value"))?;
        if vals.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} values, found {}",
                vals.len()
            )));
        }
        Ok(vals)
    };
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let head = lines.next().ok_or_else(|| bad("truncated file"))?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "layer" {
            return Err(bad("bad layer header"));
        }
        let fan_in: usize = fields[1].parse().map_err(|_| bad("bad fan_in"))?;
        let fan_out: usize = fields[2].parse().map_err(|_| bad("bad fan_out"))?;
        let activation = Activation::from_name(fields[3]).ok_or_else(|| bad("unknown activation"))?;
        let w = parse_row(lines.next(), fan_in * fan_out)?;
        let b = parse_row(lines.next(), fan_out)?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((fan_in, fan_out), w).map_err(|e| Error::Checkpoint(e.to_string()))?,
            bias: Array1::from_vec(b),
            activation,
        });
    }
    Ok((MlpParams::from_layers(layers)?, log_std))
}
