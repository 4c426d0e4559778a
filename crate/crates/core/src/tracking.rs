//! Actor/critic arguments and the tracking reward.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::drivetrain::{rpm_to_rad_s, DriveTrainState};
use crate::error::{Error, Result};
use crate::references::ReferenceTrajectory;

/// Layout of the argument vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentVariant {
    /// `[ω_out, ω_in, ω^r_k − ω_in]`
    Current,
    /// `[ω_out, ω_in, ω^r_k, …, ω^r_{k+N}]`
    Global,
    /// `[ω_out, ω^r_k − ω_in, …, ω^r_{k+N} − ω_in]`
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArgumentSpec {
    pub variant: ArgumentVariant,
    /// Number of future reference values N; ignored for [`ArgumentVariant::Current`].
    pub horizon: usize,
}

impl ArgumentSpec {
    pub fn current() -> Self {
        Self {
            variant: ArgumentVariant::Current,
            horizon: 0,
        }
    }

    pub fn global(horizon: usize) -> Self {
        Self {
            variant: ArgumentVariant::Global,
            horizon,
        }
    }

    pub fn residual(horizon: usize) -> Self {
        Self {
            variant: ArgumentVariant::Residual,
            horizon,
        }
    }

    pub fn dim(&self) -> usize {
        match self.variant {
            ArgumentVariant::Current => 3,
            ArgumentVariant::Global => 3 + self.horizon,
            ArgumentVariant::Residual => 2 + self.horizon,
        }
    }

    /// Furthest reference index ahead of `k` that the argument reads.
    pub fn lookahead(&self) -> usize {
        match self.variant {
            ArgumentVariant::Current => 0,
            _ => self.horizon,
        }
    }
}

impl fmt::Display for ArgumentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            ArgumentVariant::Current => write!(f, "current"),
            ArgumentVariant::Global => write!(f, "global-{}", self.horizon),
            ArgumentVariant::Residual => write!(f, "residual-{}", self.horizon),
        }
    }
}

/// Affine normalization applied to argument components (all scales in rad/s).
///
/// Output speed is divided by `out_scale`; global input/reference speeds map to
/// `(ω − speed_center) / speed_scale`; residuals are divided by `residual_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgumentScaling {
    pub out_scale: f64,
    pub speed_center: f64,
    pub speed_scale: f64,
    pub residual_scale: f64,
}

impl Default for ArgumentScaling {
    fn default() -> Self {
        Self {
            out_scale: 100.0,
            speed_center: rpm_to_rad_s(2000.0),
            speed_scale: 1.0,
            residual_scale: 1.0,
        }
    }
}

impl ArgumentScaling {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("out_scale", self.out_scale),
            ("speed_scale", self.speed_scale),
            ("residual_scale", self.residual_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.speed_center.is_finite() {
            return Err(Error::Config("speed_center must be finite".into()));
        }
        Ok(())
    }
}

/// Normalized actor/critic input.
#[derive(Debug, Clone, PartialEq)]
pub struct Argument {
    pub data: Vec<f64>,
    pub spec: ArgumentSpec,
}

/// Builds the argument for step `k` from the current state and the reference preview.
pub fn build_argument(
    spec: ArgumentSpec,
    scaling: &ArgumentScaling,
    state: DriveTrainState,
    traj: &ReferenceTrajectory,
    k: usize,
) -> Result<Argument> {
    if !state.is_finite() {
        return Err(Error::NumericDomain(format!(
            "state ({}, {}) at step {k}",
            state.omega_in, state.omega_out
        )));
    }
    let out = state.omega_out / scaling.out_scale;
    let global = |w: f64| (w - scaling.speed_center) / scaling.speed_scale;
    let residual = |r: f64| (r - state.omega_in) / scaling.residual_scale;
    let mut data = Vec::with_capacity(spec.dim());
    data.push(out);
    match spec.variant {
        ArgumentVariant::Current => {
            data.push(global(state.omega_in));
            data.push(residual(traj.lookup(k)));
        }
        ArgumentVariant::Global => {
            data.push(global(state.omega_in));
            data.extend((0..=spec.horizon).map(|i| global(traj.lookup(k + i))));
        }
        ArgumentVariant::Residual => {
            data.extend((0..=spec.horizon).map(|i| residual(traj.lookup(k + i))));
        }
    }
    debug_assert_eq!(data.len(), spec.dim());
    Ok(Argument { data, spec })
}

/// Weighting and unit scales of the quadratic tracking reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Weight of the control-effort penalty.
    pub beta: f64,
    /// Speed unit of the tracking term (rad/s).
    pub reward_speed_scale: f64,
    /// Torque unit of the control term (N·m).
    pub reward_torque_scale: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            beta: 0.0,
            reward_speed_scale: 1.0,
            reward_torque_scale: 1.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        for v in [self.reward_speed_scale, self.reward_torque_scale] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("reward scales must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Reward for the transition from step `k` to `k + 1`:
/// `−(ω_in,k+1 − ω^r_{k+1})²/s_ω² − β·(T_cl − T_in)²/s_T²`.
pub fn reward(
    next_state: DriveTrainState,
    traj: &ReferenceTrajectory,
    k: usize,
    t_cl: f64,
    t_in: f64,
    params: &RewardParams,
) -> f64 {
    let speed_err = (next_state.omega_in - traj.lookup(k + 1)) / params.reward_speed_scale;
    let torque_dev = (t_cl - t_in) / params.reward_torque_scale;
    -(speed_err * speed_err) - params.beta * torque_dev * torque_dev
}
