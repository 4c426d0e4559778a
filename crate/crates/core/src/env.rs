//! Closed-loop episode runner shared by the learned and the PI controllers.

use serde::{Deserialize, Serialize};

use crate::drivetrain::{clutch_torque, discretize, DiscreteModel, DriveTrainParams, DriveTrainState, Pt1Filter};
use crate::error::{Error, Result};
use crate::references::ReferenceTrajectory;
use crate::tracking::{build_argument, reward, Argument, ArgumentScaling, ArgumentSpec, RewardParams};

/// Everything needed to simulate one tracking episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub drivetrain: DriveTrainParams,
    pub reward: RewardParams,
    pub scaling: ArgumentScaling,
    /// PT1 cutoff on the applied clutch torque; `None` applies commands directly.
    pub pt1_cutoff_hz: Option<f64>,
    /// Initial output speed as a fraction of the synchronous speed ω_in,0/θ.
    pub initial_out_fraction: f64,
    /// Torque (N·m) represented by one unit of normalized actor output.
    pub action_scale: f64,
    pub episode_len: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            drivetrain: DriveTrainParams::default(),
            reward: RewardParams::default(),
            scaling: ArgumentScaling::default(),
            pt1_cutoff_hz: None,
            initial_out_fraction: 0.5,
            action_scale: 1.0,
            episode_len: 100,
        }
    }
}

/// Validated environment with its discretized model.
#[derive(Debug, Clone)]
pub struct TrackingEnv {
    pub config: EnvConfig,
    pub model: DiscreteModel,
}

/// Outcome of one applied control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// Clutch torque that actually acted on the plant (after the lag element, if any).
    pub t_cl: f64,
    pub next_state: DriveTrainState,
    pub done: bool,
}

impl TrackingEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        let model = discretize(&config.drivetrain)?;
        config.reward.validate()?;
        config.scaling.validate()?;
        if !(config.initial_out_fraction.is_finite() && config.initial_out_fraction >= 0.0) {
            return Err(Error::Config(format!(
                "initial_out_fraction must be >= 0, got {}",
                config.initial_out_fraction
            )));
        }
        if !(config.action_scale.is_finite() && config.action_scale > 0.0) {
            return Err(Error::Config(format!(
                "action_scale must be positive, got {}",
                config.action_scale
            )));
        }
        if config.episode_len == 0 {
            return Err(Error::Config("episode_len must be positive".into()));
        }
        if let Some(fc) = config.pt1_cutoff_hz {
            Pt1Filter::new(fc, config.drivetrain.dt)?;
        }
        Ok(Self { config, model })
    }

    pub fn t_in(&self) -> f64 {
        self.config.drivetrain.t_in
    }

    pub fn ratio(&self) -> f64 {
        self.config.drivetrain.ratio
    }

    /// Initial state: on-reference input speed, output speed below synchronous.
    pub fn initial_state(&self, traj: &ReferenceTrajectory) -> DriveTrainState {
        let omega_in = traj.lookup(0);
        DriveTrainState::new(omega_in, omega_in / self.ratio() * self.config.initial_out_fraction)
    }

    pub fn start<'a>(&'a self, traj: &'a ReferenceTrajectory) -> Episode<'a> {
        let filter = self.config.pt1_cutoff_hz.map(|fc| {
            Pt1Filter::new(fc, self.config.drivetrain.dt)
                .expect("cutoff validated in TrackingEnv::new")
                .reset(self.t_in())
        });
        Episode {
            env: self,
            traj,
            k: 0,
            state: self.initial_state(traj),
            filter,
        }
    }
}

/// A running episode.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    env: &'a TrackingEnv,
    traj: &'a ReferenceTrajectory,
    k: usize,
    state: DriveTrainState,
    filter: Option<Pt1Filter>,
}

impl<'a> Episode<'a> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn state(&self) -> DriveTrainState {
        self.state
    }

    pub fn reference(&self) -> &'a ReferenceTrajectory {
        self.traj
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.env.config.episode_len
    }

    pub fn argument(&self, spec: ArgumentSpec) -> Result<Argument> {
        build_argument(spec, &self.env.config.scaling, self.state, self.traj, self.k)
    }

    /// Applies a capacity torque in N·m (sign from the slip, then the optional lag).
    pub fn apply_capacity(&mut self, t_cap: f64) -> Result<StepOutcome> {
        let commanded = clutch_torque(t_cap, self.state, self.env.ratio())?;
        let t_cl = match self.filter.take() {
            Some(f) => {
                let (out, next) = f.apply(commanded)?;
                self.filter = Some(next);
                out
            }
            None => commanded,
        };
        let next_state = self.env.model.step(self.state, t_cl, self.env.t_in())?;
        let r = reward(
            next_state,
            self.traj,
            self.k,
            t_cl,
            self.env.t_in(),
            &self.env.config.reward,
        );
        self.state = next_state;
        self.k += 1;
        Ok(StepOutcome {
            reward: r,
            t_cl,
            next_state,
            done: self.is_done(),
        })
    }
}

/// One row of a recorded episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub omega_in: f64,
    pub omega_ref: f64,
    pub t_cl: f64,
    pub reward: f64,
}

/// Closed-loop record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub episodic_reward: f64,
    pub rows: Vec<TraceRow>,
}

/// Runs one full episode, asking `controller` for a capacity torque (N·m) at every step.
pub fn rollout<F>(env: &TrackingEnv, traj: &ReferenceTrajectory, mut controller: F) -> Result<EpisodeTrace>
where
    F: FnMut(&Episode<'_>) -> Result<f64>,
{
    let mut ep = env.start(traj);
    let mut rows = Vec::with_capacity(env.config.episode_len);
    let mut total = 0.0;
    while !ep.is_done() {
        let t_cap = controller(&ep)?;
        let k = ep.k();
        let out = ep.apply_capacity(t_cap)?;
        total += out.reward;
        rows.push(TraceRow {
            step: k,
            omega_in: out.next_state.omega_in,
            omega_ref: traj.lookup(k + 1),
            t_cl: out.t_cl,
            reward: out.reward,
        });
    }
    Ok(EpisodeTrace {
        episodic_reward: total,
        rows,
    })
}
