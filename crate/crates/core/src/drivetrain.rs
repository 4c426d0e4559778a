//! Clutch / gearbox drive-train model.
//!
//! The two-inertia model
//!
//! ```text
//! J_in  dω_in/dt  = −T_cl + T_in
//! J_out dω_out/dt = θ·T_cl − η·ω_out
//! ```
//!
//! is only ever advanced through its exact zero-order-hold discretization
//! (see [`discretize`]). Speeds are in rad/s, torques in N·m.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Converts rad/s to revolutions per minute.
pub fn rad_s_to_rpm(omega: f64) -> f64 {
    omega * 60.0 / (2.0 * std::f64::consts::PI)
}

/// Converts revolutions per minute to rad/s.
pub fn rpm_to_rad_s(rpm: f64) -> f64 {
    rpm * 2.0 * std::f64::consts::PI / 60.0
}

/// Physical constants of the simple drive train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTrainParams {
    /// Input moment of inertia (kg·m²).
    pub j_in: f64,
    /// Output moment of inertia (kg·m²).
    pub j_out: f64,
    /// Gearbox transmission ratio.
    pub ratio: f64,
    /// Constant input torque (N·m).
    pub t_in: f64,
    /// Output damping, T_out = eta·ω_out (N·m·s/rad).
    pub eta: f64,
    /// Simulation time step (s).
    pub dt: f64,
}

impl Default for DriveTrainParams {
    fn default() -> Self {
        Self {
            j_in: 0.209,
            j_out: 86.6033,
            ratio: 10.02,
            t_in: 20.0,
            eta: 2.0,
            dt: 0.01,
        }
    }
}

impl DriveTrainParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("j_in", self.j_in),
            ("j_out", self.j_out),
            ("ratio", self.ratio),
            ("t_in", self.t_in),
            ("eta", self.eta),
            ("dt", self.dt),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Input and output shaft speeds (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTrainState {
    pub omega_in: f64,
    pub omega_out: f64,
}

impl DriveTrainState {
    pub fn new(omega_in: f64, omega_out: f64) -> Self {
        Self { omega_in, omega_out }
    }

    /// Clutch slip ω_in − θ·ω_out.
    pub fn slip(&self, ratio: f64) -> f64 {
        self.omega_in - ratio * self.omega_out
    }

    pub fn is_finite(&self) -> bool {
        self.omega_in.is_finite() && self.omega_out.is_finite()
    }
}

/// Exact discrete-time system `x' = A x + B1 T_cl + B2 T_in` with diagonal `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteModel {
    pub a11: f64,
    pub a22: f64,
    pub b1: [f64; 2],
    pub b2: [f64; 2],
}

/// Zero-order-hold discretization of the drive-train ODEs over `params.dt`.
pub fn discretize(params: &DriveTrainParams) -> Result<DiscreteModel> {
    params.validate()?;
    let a22 = (-params.eta * params.dt / params.j_out).exp();
    // (θ/η)(1 − a22); expm1 keeps precision when η·dt/J_out is tiny.
    let b1_out = params.ratio / params.eta * -(-params.eta * params.dt / params.j_out).exp_m1();
    Ok(DiscreteModel {
        a11: 1.0,
        a22,
        b1: [-params.dt / params.j_in, b1_out],
        b2: [params.dt / params.j_in, 0.0],
    })
}

impl DiscreteModel {
    /// Advances the state by one time step under clutch torque `t_cl` and input torque `t_in`.
    pub fn step(&self, state: DriveTrainState, t_cl: f64, t_in: f64) -> Result<DriveTrainState> {
        ensure_finite(state.omega_in, "omega_in")?;
        ensure_finite(state.omega_out, "omega_out")?;
        ensure_finite(t_cl, "t_cl")?;
        ensure_finite(t_in, "t_in")?;
        // Torque terms are summed first so that t_cl == t_in cancels exactly.
        Ok(DriveTrainState {
            omega_in: self.a11 * state.omega_in + (self.b1[0] * t_cl + self.b2[0] * t_in),
            omega_out: self.a22 * state.omega_out + self.b1[1] * t_cl + self.b2[1] * t_in,
        })
    }

    /// Output speed that a constant clutch torque holds fixed: θ·T_cl/η.
    pub fn steady_output_speed(&self, t_cl: f64) -> f64 {
        self.b1[1] * t_cl / (1.0 - self.a22)
    }
}

/// Friction-clutch torque law `T_cl = T_cap · sign(ω_in − θ·ω_out)`.
///
/// Zero slip counts as positive.
pub fn clutch_torque(t_cap: f64, state: DriveTrainState, ratio: f64) -> Result<f64> {
    if t_cap.is_nan() || t_cap < 0.0 {
        return Err(Error::ParameterDomain(format!(
            "capacity torque must be >= 0, got {t_cap}"
        )));
    }
    let slip = state.slip(ratio);
    ensure_finite(slip, "slip")?;
    Ok(if slip >= 0.0 { t_cap } else { -t_cap })
}

/// First-order lag on the applied clutch torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pt1Filter {
    pub cutoff_hz: f64,
    pub a_coef: f64,
    pub prev_output: f64,
    pub initialized: bool,
}

impl Pt1Filter {
    pub fn new(cutoff_hz: f64, dt: f64) -> Result<Self> {
        if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && dt.is_finite() && dt > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "PT1 needs cutoff_hz > 0 and dt > 0, got {cutoff_hz}, {dt}"
            )));
        }
        Ok(Self {
            cutoff_hz,
            a_coef: (-2.0 * std::f64::consts::PI * cutoff_hz * dt).exp(),
            prev_output: 0.0,
            initialized: false,
        })
    }

    /// Returns the filter primed with `initial` as its previous output.
    pub fn reset(self, initial: f64) -> Self {
        Self {
            prev_output: initial,
            initialized: true,
            ..self
        }
    }

    /// Filters one commanded torque. An uninitialized filter passes the first command through.
    pub fn apply(self, commanded: f64) -> Result<(f64, Self)> {
        ensure_finite(commanded, "commanded torque")?;
        let out = if !self.initialized {
            commanded
        } else if commanded > self.prev_output {
            (commanded - self.prev_output) * (1.0 - self.a_coef) + self.prev_output
        } else {
            (self.prev_output - commanded) * self.a_coef + commanded
        };
        Ok((
            out,
            Self {
                prev_output: out,
                initialized: true,
                ..self
            },
        ))
    }
}
