//! Seeded reference trajectories for the input speed.
//!
//! Three classes are generated from the same base spline so that, for a
//! given seed, the discontinuous and offset classes differ from the smooth
//! class only by their additive term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drivetrain::rpm_to_rad_s;
use crate::error::{Error, Result};

/// Reference class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceClass {
    Smooth,
    Discontinuous,
    Offset,
}

/// Generator settings. Speeds are in rpm, lengths in time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceGenConfig {
    pub episode_len: usize,
    /// Extra samples past the episode end, at least the largest preview horizon.
    pub horizon_pad: usize,
    pub mean_rpm: f64,
    pub knot_count: usize,
    pub knot_spread_rpm: f64,
    pub jump_count_min: usize,
    pub jump_count_max: usize,
    pub square_amp_rpm: f64,
    pub offsets_rpm: Vec<f64>,
}

impl Default for ReferenceGenConfig {
    fn default() -> Self {
        Self {
            episode_len: 100,
            horizon_pad: 3,
            mean_rpm: 2000.0,
            knot_count: 8,
            knot_spread_rpm: 15.0,
            jump_count_min: 1,
            jump_count_max: 19,
            square_amp_rpm: 5.0,
            offsets_rpm: vec![-940.0, 10.0, 960.0, 1910.0, 2860.0],
        }
    }
}

impl ReferenceGenConfig {
    /// Number of stored samples: the episode, the preview padding and the final successor state.
    pub fn trajectory_len(&self) -> usize {
        self.episode_len + self.horizon_pad + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.episode_len < 2 {
            return bad(format!("episode_len must be >= 2, got {}", self.episode_len));
        }
        if self.knot_count < 2 {
            return bad(format!("knot_count must be >= 2, got {}", self.knot_count));
        }
        if self.jump_count_min < 1 || self.jump_count_min > self.jump_count_max || self.jump_count_max > 19 {
            return bad(format!(
                "jump count range [{}, {}] must lie within [1, 19]",
                self.jump_count_min, self.jump_count_max
            ));
        }
        if self.jump_count_max + 1 > self.episode_len {
            return bad("episode too short for the requested jump count".into());
        }
        let finite_nonneg = [
            ("knot_spread_rpm", self.knot_spread_rpm),
            ("square_amp_rpm", self.square_amp_rpm),
        ];
        for (name, v) in finite_nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.mean_rpm.is_finite() && self.mean_rpm > 0.0) {
            return bad(format!("mean_rpm must be positive, got {}", self.mean_rpm));
        }
        if self.offsets_rpm.iter().any(|o| !o.is_finite()) {
            return bad("offsets_rpm must be finite".into());
        }
        Ok(())
    }
}

/// Input-speed reference in rad/s, one sample per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub values: Vec<f64>,
    pub class: ReferenceClass,
    pub seed: u64,
}

impl ReferenceTrajectory {
    /// Constant reference, mainly for tests and smoke runs.
    pub fn constant(value: f64, len: usize) -> Self {
        Self {
            values: vec![value; len],
            class: ReferenceClass::Smooth,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at step `k`; indices past the end repeat the last sample.
    pub fn lookup(&self, k: usize) -> f64 {
        match self.values.get(k) {
            Some(v) => *v,
            None => *self.values.last().expect("reference trajectory is empty"),
        }
    }
}

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        let n = knots.len();
        if n < 2 {
            return Err(Error::ParameterDomain(format!(
                "cubic spline needs at least 2 knots, got {n}"
            )));
        }
        if knots.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
            return Err(Error::NumericDomain("non-finite spline knot".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::ParameterDomain(
                "spline knot times must be strictly increasing".into(),
            ));
        }
        let t: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let y: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let inner = n - 2;
            let mut diag = vec![0.0; inner];
            let mut upper = vec![0.0; inner];
            let mut rhs = vec![0.0; inner];
            for i in 0..inner {
                let h0 = t[i + 1] - t[i];
                let h1 = t[i + 2] - t[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..inner {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[inner] = rhs[inner - 1] / diag[inner - 1];
            for i in (0..inner - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { t, y, m })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (first, last) = (self.t[0], self.t[self.t.len() - 1]);
        if !(x >= first && x <= last) {
            return Err(Error::ParameterDomain(format!(
                "spline evaluated at {x} outside [{first}, {last}]"
            )));
        }
        let i = match self.t.partition_point(|&ti| ti <= x) {
            0 => 0,
            p if p >= self.t.len() => self.t.len() - 2,
            p => p - 1,
        };
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        Ok(a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0)
    }
}

/// Evaluates the natural cubic spline through `knots` at `t`.
pub fn cubic_spline_eval(knots: &[(f64, f64)], t: f64) -> Result<f64> {
    NaturalCubicSpline::new(knots)?.eval(t)
}

/// Samples the base spline (rpm) and leaves the RNG positioned for class-specific draws.
fn base_spline_rpm(cfg: &ReferenceGenConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let len = cfg.trajectory_len();
    let span = (len - 1) as f64;
    let knots: Vec<(f64, f64)> = (0..cfg.knot_count)
        .map(|j| {
            let u: f64 = rng.random();
            let t = span * j as f64 / (cfg.knot_count - 1) as f64;
            (t, cfg.mean_rpm + cfg.knot_spread_rpm * (2.0 * u - 1.0))
        })
        .collect();
    let spline = NaturalCubicSpline::new(&knots)?;
    (0..len).map(|k| spline.eval((k as f64).min(span))).collect()
}

fn finish(rpm: Vec<f64>, class: ReferenceClass, seed: u64) -> Result<ReferenceTrajectory> {
    let values: Vec<f64> = rpm.into_iter().map(rpm_to_rad_s).collect();
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Config(format!(
            "reference seed {seed} produced non-positive speed {v} rad/s"
        )));
    }
    Ok(ReferenceTrajectory { values, class, seed })
}

/// Smooth spline reference around `mean_rpm`.
pub fn gen_smooth(cfg: &ReferenceGenConfig, seed: u64) -> Result<ReferenceTrajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rpm = base_spline_rpm(cfg, &mut rng)?;
    finish(rpm, ReferenceClass::Smooth, seed)
}

/// Square wave with levels ±`amp` whose level changes `jumps` times within `episode_len` steps.
pub fn square_wave(amp: f64, jumps: usize, initial_high: bool, episode_len: usize, len: usize) -> Vec<f64> {
    let half_period = episode_len as f64 / (jumps + 1) as f64;
    (0..len)
        .map(|k| {
            let phase = (k as f64 / half_period).floor() as usize;
            if phase.is_multiple_of(2) == initial_high {
                amp
            } else {
                -amp
            }
        })
        .collect()
}

/// Smooth reference plus a periodic square wave of `square_amp_rpm`.
pub fn gen_discontinuous(cfg: &ReferenceGenConfig, seed: u64) -> Result<ReferenceTrajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rpm = base_spline_rpm(cfg, &mut rng)?;
    let jumps = rng.random_range(cfg.jump_count_min..=cfg.jump_count_max);
    let initial_high: bool = rng.random();
    let wave = square_wave(cfg.square_amp_rpm, jumps, initial_high, cfg.episode_len, rpm.len());
    for (v, w) in rpm.iter_mut().zip(wave) {
        *v += w;
    }
    finish(rpm, ReferenceClass::Discontinuous, seed)
}

/// Smooth reference shifted by one offset drawn uniformly from `offsets_rpm`.
pub fn gen_offset(cfg: &ReferenceGenConfig, seed: u64) -> Result<ReferenceTrajectory> {
    cfg.validate()?;
    if cfg.offsets_rpm.is_empty() {
        return Err(Error::Config("offsets_rpm must not be empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rpm = base_spline_rpm(cfg, &mut rng)?;
    let offset = cfg.offsets_rpm[rng.random_range(0..cfg.offsets_rpm.len())];
    for v in rpm.iter_mut() {
        *v += offset;
    }
    finish(rpm, ReferenceClass::Offset, seed)
}

/// Dispatches to the generator for `class`.
pub fn generate(class: ReferenceClass, cfg: &ReferenceGenConfig, seed: u64) -> Result<ReferenceTrajectory> {
    match class {
        ReferenceClass::Smooth => gen_smooth(cfg, seed),
        ReferenceClass::Discontinuous => gen_discontinuous(cfg, seed),
        ReferenceClass::Offset => gen_offset(cfg, seed),
    }
}

/// Number of level changes between consecutive samples in `values[..episode_len]`.
pub fn count_level_changes(values: &[f64], episode_len: usize) -> usize {
    values[..episode_len.min(values.len())]
        .windows(2)
        .filter(|w| w[0] != w[1])
        .count()
}
