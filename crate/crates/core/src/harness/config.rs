//! Flat experiment configuration, presets and seed layout.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::drivetrain::{rpm_to_rad_s, DriveTrainParams};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::pi::{GridSpec, PiLaw, PiOutputMode, RefineSpec};
use crate::ppo::{OptimizerKind, PpoConfig};
use crate::references::{ReferenceClass, ReferenceGenConfig};
use crate::tracking::{ArgumentScaling, ArgumentSpec, RewardParams};

/// The three reference-class experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Smooth,
    #[serde(alias = "discontinuous")]
    Jumps,
    Offset,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [ExperimentKind::Smooth, ExperimentKind::Jumps, ExperimentKind::Offset];

    pub fn reference_class(self) -> ReferenceClass {
        match self {
            ExperimentKind::Smooth => ReferenceClass::Smooth,
            ExperimentKind::Jumps => ReferenceClass::Discontinuous,
            ExperimentKind::Offset => ReferenceClass::Offset,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Smooth => "smooth",
            ExperimentKind::Jumps => "jumps",
            ExperimentKind::Offset => "offset",
        }
    }

    /// Variants compared in this experiment.
    pub fn default_variants(self) -> Vec<Variant> {
        use Variant::*;
        match self {
            ExperimentKind::Jumps => vec![Cppo, Gppo1, Gppo3, Rppo1, Rppo3, Pi],
            _ => vec![Cppo, Gppo1, Rppo1, Pi],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" => Ok(ExperimentKind::Smooth),
            "jumps" | "discontinuous" => Ok(ExperimentKind::Jumps),
            "offset" => Ok(ExperimentKind::Offset),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Controller variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "CPPO")]
    Cppo,
    #[serde(rename = "GPPO1")]
    Gppo1,
    #[serde(rename = "GPPO3")]
    Gppo3,
    #[serde(rename = "RPPO1")]
    Rppo1,
    #[serde(rename = "RPPO3")]
    Rppo3,
    #[serde(rename = "PI")]
    Pi,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Cppo,
        Variant::Gppo1,
        Variant::Gppo3,
        Variant::Rppo1,
        Variant::Rppo3,
        Variant::Pi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cppo => "CPPO",
            Variant::Gppo1 => "GPPO1",
            Variant::Gppo3 => "GPPO3",
            Variant::Rppo1 => "RPPO1",
            Variant::Rppo3 => "RPPO3",
            Variant::Pi => "PI",
        }
    }

    /// Argument layout of a learned variant; `None` for PI.
    pub fn argument_spec(self) -> Option<ArgumentSpec> {
        match self {
            Variant::Cppo => Some(ArgumentSpec::current()),
            Variant::Gppo1 => Some(ArgumentSpec::global(1)),
            Variant::Gppo3 => Some(ArgumentSpec::global(3)),
            Variant::Rppo1 => Some(ArgumentSpec::residual(1)),
            Variant::Rppo3 => Some(ArgumentSpec::residual(3)),
            Variant::Pi => None,
        }
    }

    fn index(self) -> u64 {
        Variant::ALL.iter().position(|v| *v == self).expect("listed") as u64
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

/// Size preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

/// Every tunable of an experiment as one flat key-value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Empty selects the experiment's default variant list.
    pub variants: Vec<Variant>,
    pub seeds: usize,
    pub master_seed: u64,
    pub episodes: usize,
    pub epochs_per_episode: usize,
    pub eval_every: usize,
    pub test_refs: usize,
    /// Training references averaged by the PI tuning cost.
    pub pi_tune_refs: usize,

    // drive train
    pub j_in: f64,
    pub j_out: f64,
    pub ratio: f64,
    pub t_in: f64,
    pub eta: f64,
    pub dt: f64,
    pub episode_len: usize,
    pub initial_out_fraction: f64,
    /// PT1 cutoff used by the jumps experiment.
    pub pt1_cutoff_hz: f64,
    /// Control-effort weight used by the jumps experiment.
    pub jumps_beta: f64,

    // reward and argument scaling
    pub reward_speed_scale: f64,
    pub reward_torque_scale: f64,
    pub action_scale: f64,
    pub out_scale: f64,
    /// Centre of the global speed inputs; derived from the reference range when absent.
    pub speed_center_rpm: Option<f64>,
    /// Divisor of the global speed inputs (rad/s); derived from the reference range when absent.
    pub speed_scale: Option<f64>,
    pub residual_scale: f64,

    // references
    pub mean_rpm: f64,
    pub knot_count: usize,
    pub knot_spread_rpm: f64,
    pub jump_count_min: usize,
    pub jump_count_max: usize,
    pub square_amp_rpm: f64,
    pub offsets_rpm: Vec<f64>,

    // learning
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub tau: f64,
    pub target_period: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub initial_std: f64,
    pub normalize_advantages: bool,
    pub bootstrap_time_limit: bool,
    pub optimizer: OptimizerKind,

    // PI baseline
    pub pi_output_mode: PiOutputMode,
    /// Add the constant input torque to every PI request.
    pub pi_feedforward: bool,
    pub pi_k_p_min: f64,
    pub pi_k_p_max: f64,
    pub pi_k_p_points: usize,
    pub pi_k_i_min: f64,
    pub pi_k_i_max: f64,
    pub pi_k_i_points: usize,
    pub pi_refine: bool,
    pub pi_fd_step: f64,
    pub pi_max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dt = DriveTrainParams::default();
        let refs = ReferenceGenConfig::default();
        let ppo = PpoConfig::default();
        let grid = GridSpec::default();
        let refine = RefineSpec::default();
        let env = EnvConfig::default();
        Self {
            experiment: ExperimentKind::Smooth,
            variants: Vec::new(),
            seeds: 15,
            master_seed: 0,
            episodes: ppo.episodes,
            epochs_per_episode: ppo.epochs_per_episode,
            eval_every: 10,
            test_refs: 100,
            pi_tune_refs: 50,
            j_in: dt.j_in,
            j_out: dt.j_out,
            ratio: dt.ratio,
            t_in: dt.t_in,
            eta: dt.eta,
            dt: dt.dt,
            episode_len: refs.episode_len,
            initial_out_fraction: env.initial_out_fraction,
            pt1_cutoff_hz: 100.0,
            jumps_beta: 1.0 / 3000.0,
            reward_speed_scale: env.reward.reward_speed_scale,
            reward_torque_scale: env.reward.reward_torque_scale,
            action_scale: env.action_scale,
            out_scale: env.scaling.out_scale,
            speed_center_rpm: None,
            speed_scale: None,
            residual_scale: env.scaling.residual_scale,
            mean_rpm: refs.mean_rpm,
            knot_count: refs.knot_count,
            knot_spread_rpm: refs.knot_spread_rpm,
            jump_count_min: refs.jump_count_min,
            jump_count_max: refs.jump_count_max,
            square_amp_rpm: refs.square_amp_rpm,
            offsets_rpm: refs.offsets_rpm,
            gamma: ppo.gamma,
            gae_lambda: ppo.gae_lambda,
            clip: ppo.clip,
            entropy_coef: ppo.entropy_coef,
            actor_lr: ppo.actor_lr,
            critic_lr: ppo.critic_lr,
            batch_size: ppo.batch_size,
            buffer_capacity: ppo.buffer_capacity,
            tau: ppo.tau,
            target_period: ppo.target_period,
            hidden1: ppo.hidden1,
            hidden2: ppo.hidden2,
            initial_std: ppo.initial_std,
            normalize_advantages: ppo.normalize_advantages,
            bootstrap_time_limit: ppo.bootstrap_time_limit,
            optimizer: ppo.optimizer,
            pi_output_mode: PiOutputMode::default(),
            pi_feedforward: false,
            pi_k_p_min: grid.k_p_min,
            pi_k_p_max: grid.k_p_max,
            pi_k_p_points: grid.k_p_points,
            pi_k_i_min: grid.k_i_min,
            pi_k_i_max: grid.k_i_max,
            pi_k_i_points: grid.k_i_points,
            pi_refine: refine.enabled,
            pi_fd_step: refine.fd_step,
            pi_max_iter: refine.max_iter,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            ..Default::default()
        }
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Desk => {
                self.seeds = 3;
                self.episodes = 500;
                self.epochs_per_episode = 50;
            }
            Preset::Full => {
                self.seeds = 15;
                self.episodes = 2000;
                self.epochs_per_episode = 100;
            }
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn variant_list(&self) -> Vec<Variant> {
        if self.variants.is_empty() {
            self.experiment.default_variants()
        } else {
            self.variants.clone()
        }
    }

    pub fn drivetrain(&self) -> DriveTrainParams {
        DriveTrainParams {
            j_in: self.j_in,
            j_out: self.j_out,
            ratio: self.ratio,
            t_in: self.t_in,
            eta: self.eta,
            dt: self.dt,
        }
    }

    /// Range `[lo, hi]` (rpm) spanned by the knots, square wave and offsets of this experiment.
    pub fn reference_range_rpm(&self) -> (f64, f64) {
        let mut lo = self.mean_rpm - self.knot_spread_rpm;
        let mut hi = self.mean_rpm + self.knot_spread_rpm;
        match self.experiment {
            ExperimentKind::Smooth => {}
            ExperimentKind::Jumps => {
                lo -= self.square_amp_rpm;
                hi += self.square_amp_rpm;
            }
            ExperimentKind::Offset => {
                let min = self.offsets_rpm.iter().copied().fold(f64::INFINITY, f64::min);
                let max = self.offsets_rpm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                lo += min;
                hi += max;
            }
        }
        (lo, hi)
    }

    /// Environment settings; the jumps experiment switches on the lag and the effort penalty.
    pub fn env_config(&self) -> EnvConfig {
        let jumps = self.experiment == ExperimentKind::Jumps;
        let (lo, hi) = self.reference_range_rpm();
        let center = 0.5 * (lo + hi);
        // a degenerate range (zero spread) still needs a positive divisor
        let half_width = (0.5 * (hi - lo)).max(1.0);
        EnvConfig {
            drivetrain: self.drivetrain(),
            reward: RewardParams {
                beta: if jumps { self.jumps_beta } else { 0.0 },
                reward_speed_scale: self.reward_speed_scale,
                reward_torque_scale: self.reward_torque_scale,
            },
            scaling: ArgumentScaling {
                out_scale: self.out_scale,
                speed_center: rpm_to_rad_s(self.speed_center_rpm.unwrap_or(center)),
                speed_scale: self.speed_scale.unwrap_or(rpm_to_rad_s(half_width)),
                residual_scale: self.residual_scale,
            },
            pt1_cutoff_hz: jumps.then_some(self.pt1_cutoff_hz),
            initial_out_fraction: self.initial_out_fraction,
            action_scale: self.action_scale,
            episode_len: self.episode_len,
        }
    }

    pub fn reference_config(&self) -> ReferenceGenConfig {
        ReferenceGenConfig {
            episode_len: self.episode_len,
            horizon_pad: 3,
            mean_rpm: self.mean_rpm,
            knot_count: self.knot_count,
            knot_spread_rpm: self.knot_spread_rpm,
            jump_count_min: self.jump_count_min,
            jump_count_max: self.jump_count_max,
            square_amp_rpm: self.square_amp_rpm,
            offsets_rpm: self.offsets_rpm.clone(),
        }
    }

    pub fn ppo_config(&self) -> PpoConfig {
        PpoConfig {
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            clip: self.clip,
            entropy_coef: self.entropy_coef,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            tau: self.tau,
            target_period: self.target_period,
            episodes: self.episodes,
            epochs_per_episode: self.epochs_per_episode,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            initial_std: self.initial_std,
            normalize_advantages: self.normalize_advantages,
            bootstrap_time_limit: self.bootstrap_time_limit,
            optimizer: self.optimizer,
        }
    }

    pub fn pi_law(&self) -> PiLaw {
        PiLaw {
            mode: self.pi_output_mode,
            feedforward: if self.pi_feedforward { self.t_in } else { 0.0 },
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            k_p_min: self.pi_k_p_min,
            k_p_max: self.pi_k_p_max,
            k_p_points: self.pi_k_p_points,
            k_i_min: self.pi_k_i_min,
            k_i_max: self.pi_k_i_max,
            k_i_points: self.pi_k_i_points,
        }
    }

    pub fn refine_spec(&self) -> RefineSpec {
        RefineSpec {
            enabled: self.pi_refine,
            fd_step: self.pi_fd_step,
            max_iter: self.pi_max_iter,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.drivetrain().validate()?;
        self.reference_config().validate()?;
        self.ppo_config().validate()?;
        self.grid_spec().validate()?;
        crate::env::TrackingEnv::new(self.env_config())?;
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be positive".into()));
        }
        if self.test_refs == 0 || self.pi_tune_refs == 0 {
            return Err(Error::Config("test_refs and pi_tune_refs must be positive".into()));
        }
        if self.pi_tune_refs > SEED_BLOCK as usize || self.test_refs > SEED_BLOCK as usize {
            return Err(Error::Config("reference counts exceed the seed block size".into()));
        }
        if self.episodes as u64 > SEED_BLOCK {
            return Err(Error::Config("episode count exceeds the seed block size".into()));
        }
        if self.seeds as u64 > 1 << 16 {
            return Err(Error::Config("at most 65536 seeds are supported".into()));
        }
        if self.offsets_rpm.is_empty() && self.experiment == ExperimentKind::Offset {
            return Err(Error::Config("offset experiment needs at least one offset".into()));
        }
        Ok(())
    }

    pub fn seed_layout(&self) -> SeedLayout {
        SeedLayout::new(self.master_seed)
    }
}

/// Width of each disjoint seed sub-range.
pub const SEED_BLOCK: u64 = 1 << 24;

/// Derivation of every random seed from the master seed.
///
/// The master seed selects a 2³² window; inside it, consecutive 2²⁴ blocks
/// hold training references, the evaluation reference, test references and
/// the per-run learner streams, so no two roles ever share a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLayout {
    pub base: u64,
}

impl SeedLayout {
    pub fn new(master_seed: u64) -> Self {
        Self {
            base: master_seed.wrapping_mul(1 << 32),
        }
    }

    fn block(&self, b: u64, offset: u64) -> u64 {
        debug_assert!(offset < SEED_BLOCK);
        self.base.wrapping_add(b * SEED_BLOCK + offset)
    }

    /// Reference of training episode `episode` (shared by all runs).
    pub fn train_reference(&self, episode: usize) -> u64 {
        self.block(0, episode as u64)
    }

    pub fn eval_reference(&self) -> u64 {
        self.block(1, 0)
    }

    pub fn test_reference(&self, index: usize) -> u64 {
        self.block(2, index as u64)
    }

    /// Network initialization and exploration noise of one learned run.
    pub fn learner(&self, variant: Variant, seed: usize) -> u64 {
        self.block(3, (variant.index() << 16) | seed as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::for_experiment(ExperimentKind::Jumps);
        cfg.variants = vec![Variant::Rppo3, Variant::Pi];
        cfg.apply_preset(Preset::Desk);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("experiment = \"offset\"\nseeds = 2\n").unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Offset);
        assert_eq!(cfg.seeds, 2);
        assert_eq!(cfg.gamma, 0.7);
        assert!(ExperimentConfig::from_toml_str("gama = 0.5").is_err());
    }

    #[test]
    fn jumps_forces_lag_and_penalty() {
        let env = ExperimentConfig::for_experiment(ExperimentKind::Jumps).env_config();
        assert_eq!(env.pt1_cutoff_hz, Some(100.0));
        assert_eq!(env.reward.beta, 1.0 / 3000.0);
        for kind in [ExperimentKind::Smooth, ExperimentKind::Offset] {
            let mut cfg = ExperimentConfig::for_experiment(kind);
            cfg.jumps_beta = 0.5;
            let env = cfg.env_config();
            assert_eq!(env.pt1_cutoff_hz, None);
            assert_eq!(env.reward.beta, 0.0);
        }
    }

    #[test]
    fn derived_speed_normalization() {
        let smooth = ExperimentConfig::for_experiment(ExperimentKind::Smooth);
        let (lo, hi) = smooth.reference_range_rpm();
        assert_eq!((lo, hi), (1985.0, 2015.0));
        let env = smooth.env_config();
        assert!((env.scaling.speed_center - rpm_to_rad_s(2000.0)).abs() < 1e-12);
        assert!((env.scaling.speed_scale - rpm_to_rad_s(15.0)).abs() < 1e-12);
        let offset = ExperimentConfig::for_experiment(ExperimentKind::Offset);
        assert_eq!(offset.reference_range_rpm(), (1045.0, 4875.0));
        let mut fixed = offset.clone();
        fixed.speed_center_rpm = Some(1000.0);
        fixed.speed_scale = Some(3.0);
        let env = fixed.env_config();
        assert_eq!(env.scaling.speed_scale, 3.0);
        assert!((env.scaling.speed_center - rpm_to_rad_s(1000.0)).abs() < 1e-12);
    }

    #[test]
    fn seed_blocks_are_disjoint() {
        let s = SeedLayout::new(7);
        let train: Vec<u64> = (0..2000).map(|e| s.train_reference(e)).collect();
        let test: Vec<u64> = (0..100).map(|i| s.test_reference(i)).collect();
        let learners: Vec<u64> = Variant::ALL
            .iter()
            .flat_map(|v| (0..15).map(move |k| s.learner(*v, k)))
            .collect();
        let mut all = train.clone();
        all.push(s.eval_reference());
        all.extend(&test);
        all.extend(&learners);
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n);
        assert_ne!(SeedLayout::new(8).eval_reference(), s.eval_reference());
    }

    #[test]
    fn names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!(
            "discontinuous".parse::<ExperimentKind>().unwrap(),
            ExperimentKind::Jumps
        );
    }
}
