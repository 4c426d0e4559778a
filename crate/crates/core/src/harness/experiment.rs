//! Seeded training, best-actor selection and test-set evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeTrace, TrackingEnv};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SeedLayout, Variant};
use crate::pi::{pi_rollout, tune, PiGains, TuneReport};
use crate::policy::GaussianPolicy;
use crate::ppo::{evaluate_policy, train, EvalPoint, EvalSchedule};
use crate::references::{generate, ReferenceTrajectory};
use crate::tracking::ArgumentSpec;

/// Mean, pooled standard deviation and median of per-reference rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation over all pooled rewards.
    pub std: f64,
    pub median: f64,
    pub n_successful: usize,
    pub n_runs: usize,
}

impl Summary {
    /// Statistics of `rewards` pooled over the successful runs.
    pub fn from_rewards(rewards: &[f64], n_successful: usize, n_runs: usize) -> Self {
        if rewards.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                median: f64::NAN,
                n_successful,
                n_runs,
            };
        }
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = rewards.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        };
        Self {
            mean,
            std: var.sqrt(),
            median,
            n_successful,
            n_runs,
        }
    }
}

/// Shared reference sets of one experiment.
#[derive(Debug, Clone)]
pub struct ReferenceSets {
    pub evaluation: ReferenceTrajectory,
    pub test: Vec<ReferenceTrajectory>,
    /// Training references used for PI tuning.
    pub pi_tune: Vec<ReferenceTrajectory>,
}

impl ReferenceSets {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let seeds = cfg.seed_layout();
        let class = cfg.experiment.reference_class();
        let rc = cfg.reference_config();
        Ok(Self {
            evaluation: generate(class, &rc, seeds.eval_reference())?,
            test: (0..cfg.test_refs)
                .map(|i| generate(class, &rc, seeds.test_reference(i)))
                .collect::<Result<_>>()?,
            pi_tune: (0..cfg.pi_tune_refs)
                .map(|e| generate(class, &rc, seeds.train_reference(e)))
                .collect::<Result<_>>()?,
        })
    }
}

/// Outcome of one seed of a learned variant.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: usize,
    /// `None` on success, otherwise the failure message.
    pub failure: Option<String>,
    pub curve: Vec<EvalPoint>,
    pub best_index: Option<usize>,
    pub best_policy: Option<GaussianPolicy>,
    pub test_rewards: Vec<f64>,
}

impl SeedResult {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Everything one variant produced within an experiment.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: Variant,
    pub seeds: Vec<SeedResult>,
    pub pi: Option<TuneReport>,
    pub summary: Summary,
}

impl RunResult {
    /// Test rewards of the successful runs, seed-major.
    pub fn pooled_rewards(&self) -> Vec<f64> {
        self.seeds
            .iter()
            .filter(|s| s.succeeded())
            .flat_map(|s| s.test_rewards.iter().copied())
            .collect()
    }

    pub fn recompute_summary(&self) -> Summary {
        let ok = self.seeds.iter().filter(|s| s.succeeded()).count();
        Summary::from_rewards(&self.pooled_rewards(), ok, self.seeds.len())
    }
}

/// Deterministic test rollouts of an actor on every reference.
pub fn evaluate_actor(
    policy: &GaussianPolicy,
    spec: ArgumentSpec,
    refs: &[ReferenceTrajectory],
    env: &TrackingEnv,
) -> Result<Vec<f64>> {
    refs.iter()
        .map(|r| evaluate_policy(env, policy, spec, r).map(|t| t.episodic_reward))
        .collect()
}

/// Test rollouts of fixed PI gains.
pub fn evaluate_pi(
    gains: PiGains,
    cfg: &ExperimentConfig,
    refs: &[ReferenceTrajectory],
    env: &TrackingEnv,
) -> Result<Vec<f64>> {
    refs.iter()
        .map(|r| pi_rollout(env, r, gains, cfg.pi_law()).map(|(t, _)| t.episodic_reward))
        .collect()
}

/// Trains one seed of a learned variant and evaluates its best actor.
pub fn run_seed(
    cfg: &ExperimentConfig,
    variant: Variant,
    seed: usize,
    sets: &ReferenceSets,
    env: &TrackingEnv,
) -> Result<SeedResult> {
    let spec = variant
        .argument_spec()
        .ok_or_else(|| Error::Config("PI has no learned actor".into()))?;
    let layout: SeedLayout = cfg.seed_layout();
    let class = cfg.experiment.reference_class();
    let rc = cfg.reference_config();
    let schedule = EvalSchedule {
        every: cfg.eval_every,
        reference: Some(&sets.evaluation),
    };
    let outcome = train(
        env,
        spec,
        &cfg.ppo_config(),
        schedule,
        layout.learner(variant, seed),
        |e| generate(class, &rc, layout.train_reference(e)),
        |_, _| Ok(()),
    );
    match outcome {
        Ok(run) => {
            let test_rewards = evaluate_actor(&run.best_policy, spec, &sets.test, env)?;
            Ok(SeedResult {
                seed,
                failure: None,
                curve: run.curve,
                best_index: run.best_index,
                best_policy: Some(run.best_policy),
                test_rewards,
            })
        }
        Err(e @ (Error::Diverged { .. } | Error::NumericDomain(_))) => {
            log::warn!("{variant} seed {seed} failed: {e}");
            Ok(SeedResult {
                seed,
                failure: Some(e.to_string()),
                curve: Vec::new(),
                best_index: None,
                best_policy: None,
                test_rewards: Vec::new(),
            })
        }
        Err(e) => Err(e),
    }
}

/// Runs every seed of a variant (or tunes PI once) on the shared reference sets.
pub fn run_variant(cfg: &ExperimentConfig, variant: Variant, sets: &ReferenceSets) -> Result<RunResult> {
    cfg.validate()?;
    let env = TrackingEnv::new(cfg.env_config())?;
    if variant == Variant::Pi {
        let report = tune(&sets.pi_tune, &env, cfg.pi_law(), &cfg.grid_spec(), &cfg.refine_spec())?;
        let rewards = evaluate_pi(report.gains, cfg, &sets.test, &env)?;
        let seeds = vec![SeedResult {
            seed: 0,
            failure: None,
            curve: Vec::new(),
            best_index: None,
            best_policy: None,
            test_rewards: rewards,
        }];
        let mut result = RunResult {
            variant,
            seeds,
            pi: Some(report),
            summary: Summary::from_rewards(&[], 0, 0),
        };
        result.summary = result.recompute_summary();
        return Ok(result);
    }
    let seeds: Vec<SeedResult> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| {
            log::info!("{} {variant} seed {s}", cfg.experiment);
            run_seed(cfg, variant, s, sets, &env)
        })
        .collect::<Result<_>>()?;
    let mut result = RunResult {
        variant,
        seeds,
        pi: None,
        summary: Summary::from_rewards(&[], 0, 0),
    };
    result.summary = result.recompute_summary();
    Ok(result)
}

/// Results of all variants of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub results: Vec<RunResult>,
}

impl ExperimentResult {
    pub fn get(&self, variant: Variant) -> Option<&RunResult> {
        self.results.iter().find(|r| r.variant == variant)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sets = ReferenceSets::build(cfg)?;
    let results = cfg
        .variant_list()
        .into_iter()
        .map(|v| run_variant(cfg, v, &sets))
        .collect::<Result<_>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        results,
    })
}

/// Closed-loop trace of a variant on one reference, using the first successful seed.
pub fn illustrative_trace(
    cfg: &ExperimentConfig,
    result: &RunResult,
    reference: &ReferenceTrajectory,
) -> Result<Option<EpisodeTrace>> {
    let env = TrackingEnv::new(cfg.env_config())?;
    if let Some(report) = &result.pi {
        return Ok(Some(pi_rollout(&env, reference, report.gains, cfg.pi_law())?.0));
    }
    let spec = match result.variant.argument_spec() {
        Some(s) => s,
        None => return Ok(None),
    };
    match result.seeds.iter().find_map(|s| s.best_policy.as_ref()) {
        Some(p) => Ok(Some(evaluate_policy(&env, p, spec, reference)?)),
        None => Ok(None),
    }
}
