//! Proximal policy optimization with experience replay and a target critic.
//!
//! Each episode collects `K` transitions with the stochastic actor, then runs
//! a number of epochs. One epoch samples a batch from the replay buffer,
//! takes a gradient step on the critic's squared TD error (targets from the
//! target critic), recomputes advantages with the updated critic, takes a
//! clipped-surrogate ascent step on the actor, and every `target_period`
//! epochs moves the target critic towards the critic.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, EpisodeTrace, TrackingEnv};
use crate::error::{Error, Result};
use crate::nn::{adam_scalar, AdamState, MlpParams, ACTOR_ACTIVATIONS, ADAM_BETA1, ADAM_BETA2, CRITIC_ACTIVATIONS};
use crate::policy::{gaussian_entropy, gaussian_log_density, gaussian_log_density_grad, GaussianPolicy, PolicyGrads};
use crate::references::ReferenceTrajectory;
use crate::tracking::ArgumentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `θ ← θ ± α·∇`
    Sgd,
    Adam,
}

/// Hyper-parameters of the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
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
    pub episodes: usize,
    pub epochs_per_episode: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub initial_std: f64,
    pub normalize_advantages: bool,
    /// Bootstrap through the time-limit step instead of masking it.
    pub bootstrap_time_limit: bool,
    pub optimizer: OptimizerKind,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.7,
            gae_lambda: 0.0,
            clip: 0.1,
            entropy_coef: 0.01,
            actor_lr: 5e-5,
            critic_lr: 1.5e-3,
            batch_size: 100,
            buffer_capacity: 10_000,
            tau: 0.001,
            target_period: 2,
            episodes: 2000,
            epochs_per_episode: 100,
            hidden1: 400,
            hidden2: 300,
            initial_std: 10.0,
            normalize_advantages: false,
            bootstrap_time_limit: false,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.gae_lambda != 0.0 {
            return bad(format!(
                "gae_lambda must be 0 with replayed batches, got {}",
                self.gae_lambda
            ));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad(format!("clip must lie in (0, 1), got {}", self.clip));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        for (name, v) in [
            ("entropy_coef", self.entropy_coef),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.initial_std.is_finite() && self.initial_std > 0.0) {
            return bad(format!("initial_std must be positive, got {}", self.initial_std));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("target_period", self.target_period),
            ("hidden1", self.hidden1),
            ("hidden2", self.hidden2),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// One replay-buffer entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    /// Normalized action that was applied.
    pub u: f64,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// Behaviour-policy log-density of `u`, fixed at collection time.
    pub logp_old: f64,
    pub done: bool,
}

/// FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Up to `n` distinct transitions drawn uniformly without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let len = self.items.len();
        let n = n.min(len);
        let mut idx: Vec<usize> = (0..len).collect();
        for i in 0..n {
            let j = rng.random_range(i..len);
            idx.swap(i, j);
        }
        idx[..n].iter().map(|&i| &self.items[i]).collect()
    }
}

/// One-step temporal-difference error; `done` masks the bootstrap term.
pub fn td_error(r: f64, v_next: f64, v: f64, gamma: f64, done: bool) -> f64 {
    let mask = if done { 0.0 } else { 1.0 };
    r + gamma * v_next * mask - v
}

/// Generalized advantage estimates of one contiguous segment of TD errors.
pub fn gae(deltas: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let decay = gamma * lambda;
    let mut out = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for (i, d) in deltas.iter().enumerate().rev() {
        acc = d + decay * acc;
        out[i] = acc;
    }
    out
}

/// Per-sample clipped term `min(p·A, clip(p, 1−c, 1+c)·A)` and whether its
/// gradient flows through `p` (the unclipped branch attains the minimum).
pub fn clipped_term(p: f64, advantage: f64, c: f64) -> (f64, bool) {
    let unclipped = p * advantage;
    let clipped = p.clamp(1.0 - c, 1.0 + c) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Value and gradient of the entropy-augmented clipped surrogate.
#[derive(Debug, Clone)]
pub struct SurrogateOutput {
    pub objective: f64,
    pub grads: PolicyGrads,
    /// Share of samples whose gradient was cut by the clip.
    pub clip_fraction: f64,
}

/// `mean_i min(p_i A_i, clip(p_i) A_i) + μ·S[π]` with `p_i = exp(logp_new − logp_old)`.
pub fn clipped_surrogate(
    policy: &GaussianPolicy,
    states: ArrayView2<f64>,
    actions: &[f64],
    old_logps: &[f64],
    advantages: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> Result<SurrogateOutput> {
    let n = states.nrows();
    if n == 0 {
        return Err(Error::Config("surrogate needs a non-empty batch".into()));
    }
    for (len, ctx) in [
        (actions.len(), "actions"),
        (old_logps.len(), "old log-probabilities"),
        (advantages.len(), "advantages"),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
                context: ctx,
            });
        }
    }
    let (means, cache) = policy.mean_batch(states)?;
    let inv_n = 1.0 / n as f64;
    let mut objective = 0.0;
    let mut grad_mean = Array2::zeros((n, 1));
    let mut grad_log_std = 0.0;
    let mut clipped = 0usize;
    for i in 0..n {
        let logp = gaussian_log_density(means[i], policy.log_std, actions[i]);
        let p = (logp - old_logps[i]).exp();
        let (term, active) = clipped_term(p, advantages[i], clip);
        objective += term * inv_n;
        if active {
            // d(p·A)/dθ = p·A·dlogp/dθ
            let w = p * advantages[i] * inv_n;
            let (d_mean, d_log_std) = gaussian_log_density_grad(means[i], policy.log_std, actions[i]);
            grad_mean[[i, 0]] = w * d_mean;
            grad_log_std += w * d_log_std;
        } else {
            clipped += 1;
        }
    }
    objective += entropy_coef * gaussian_entropy(policy.log_std);
    grad_log_std += entropy_coef;
    let (mean_grads, _) = policy.mean_net.backward(&cache, grad_mean.view())?;
    Ok(SurrogateOutput {
        objective,
        grads: PolicyGrads {
            mean_net: mean_grads,
            log_std: grad_log_std,
        },
        clip_fraction: clipped as f64 * inv_n,
    })
}

/// Regression targets `r + γ·V'(s')`, masked at terminal steps.
pub fn td_targets(rewards: &[f64], next_values: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(next_values)
        .zip(dones)
        .map(|((r, v), d)| td_error(*r, *v, 0.0, gamma, *d))
        .collect()
}

/// Mean squared error `(1/L)Σ(y − V(s))²` and its parameter gradient.
pub fn critic_loss(critic: &MlpParams, states: ArrayView2<f64>, targets: &[f64]) -> Result<(f64, crate::nn::MlpGrads)> {
    let n = states.nrows();
    if n == 0 || targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: targets.len(),
            context: "critic targets",
        });
    }
    let (values, cache) = critic.forward(states)?;
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((n, 1));
    for i in 0..n {
        let err = targets[i] - values[[i, 0]];
        loss += err * err * inv_n;
        grad[[i, 0]] = -2.0 * err * inv_n;
    }
    let (grads, _) = critic.backward(&cache, grad.view())?;
    Ok((loss, grads))
}

/// One plain gradient-descent step on the critic loss; returns the pre-update loss.
pub fn critic_update(critic: &mut MlpParams, states: ArrayView2<f64>, targets: &[f64], lr: f64) -> Result<f64> {
    let (loss, grads) = critic_loss(critic, states, targets)?;
    critic.sgd_ascend(&grads, -lr)?;
    Ok(loss)
}

/// Polyak update of the target critic.
pub fn target_soft_update(target: &mut MlpParams, source: &MlpParams, tau: f64) -> Result<()> {
    target.soft_update(source, tau)
}

/// Normalized actor output to capacity torque in N·m.
fn capacity_torque(env: &TrackingEnv, action: f64) -> f64 {
    action.max(0.0) * env.config.action_scale
}

/// Rolls out the stochastic policy for one episode and returns its transitions.
pub fn collect_episode<R: Rng + ?Sized>(
    env: &TrackingEnv,
    policy: &GaussianPolicy,
    spec: ArgumentSpec,
    traj: &ReferenceTrajectory,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    let mut ep = env.start(traj);
    let mut out = Vec::with_capacity(env.config.episode_len);
    let mut s = ep.argument(spec)?.data;
    while !ep.is_done() {
        let sample = policy.sample(&s, rng)?;
        let step = ep.apply_capacity(capacity_torque(env, sample.action))?;
        let s_next = ep.argument(spec)?.data;
        out.push(Transition {
            s,
            u: sample.action,
            r: step.reward,
            s_next: s_next.clone(),
            logp_old: sample.logp,
            done: step.done,
        });
        s = s_next;
    }
    Ok(out)
}

/// Deterministic (mean-action) rollout of a policy.
pub fn evaluate_policy(
    env: &TrackingEnv,
    policy: &GaussianPolicy,
    spec: ArgumentSpec,
    traj: &ReferenceTrajectory,
) -> Result<EpisodeTrace> {
    if policy.mean_net.input_dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            actual: policy.mean_net.input_dim(),
            context: "policy input vs argument spec",
        });
    }
    rollout(env, traj, |ep| {
        let s = ep.argument(spec)?;
        Ok(capacity_torque(env, policy.mean(&s.data)?))
    })
}

/// Learning-curve point: deterministic reward on the evaluation reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// 1-based number of training episodes completed.
    pub episode: usize,
    pub reward: f64,
}

/// Index of the best evaluation point (earliest on ties).
pub fn select_best(curve: &[EvalPoint]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in curve.iter().enumerate() {
        match best {
            Some(b) if curve[b].reward >= p.reward => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Per-episode training statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Episodic reward of the stochastic training rollout.
    pub train_reward: f64,
    pub mean_critic_loss: f64,
    pub mean_clip_fraction: f64,
    pub std: f64,
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub curve: Vec<EvalPoint>,
    pub best_index: Option<usize>,
    /// Actor snapshot at the best evaluation point (final actor when no evaluation ran).
    pub best_policy: GaussianPolicy,
    pub final_policy: GaussianPolicy,
    pub critic: MlpParams,
    pub stats: Vec<EpisodeStats>,
}

/// Evaluation schedule of [`train`].
#[derive(Debug, Clone, Copy)]
pub struct EvalSchedule<'a> {
    pub every: usize,
    pub reference: Option<&'a ReferenceTrajectory>,
}

struct Optimizers {
    actor: Option<(AdamState, (f64, f64))>,
    critic: Option<AdamState>,
    t: i32,
}

/// Initial actor and critic drawn from `rng` (actor first).
pub fn init_networks<R: Rng + ?Sized>(
    env: &TrackingEnv,
    spec: ArgumentSpec,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<(GaussianPolicy, MlpParams)> {
    let sizes = [config.hidden1, config.hidden2, 1];
    let mut mean_net = MlpParams::new(spec.dim(), &sizes, &ACTOR_ACTIVATIONS, rng)?;
    // Start at the neutral capacity torque so the ReLU head is active everywhere.
    mean_net.set_output_bias(env.t_in() / env.config.action_scale);
    let actor = GaussianPolicy::new(mean_net, config.initial_std)?;
    let critic = MlpParams::new(spec.dim(), &sizes, &CRITIC_ACTIVATIONS, rng)?;
    Ok((actor, critic))
}

/// Runs the full training loop.
///
/// `next_reference(e)` supplies the training reference of episode `e`;
/// `on_eval` sees every evaluation point together with the evaluated actor.
pub fn train<F, G>(
    env: &TrackingEnv,
    spec: ArgumentSpec,
    config: &PpoConfig,
    schedule: EvalSchedule<'_>,
    seed: u64,
    mut next_reference: F,
    mut on_eval: G,
) -> Result<TrainingRun>
where
    F: FnMut(usize) -> Result<ReferenceTrajectory>,
    G: FnMut(&EvalPoint, &GaussianPolicy) -> Result<()>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut actor, mut critic) = init_networks(env, spec, config, &mut rng)?;
    let mut target = critic.clone();
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut opt = Optimizers {
        actor: (config.optimizer == OptimizerKind::Adam).then(|| (AdamState::new(&actor.mean_net), (0.0, 0.0))),
        critic: (config.optimizer == OptimizerKind::Adam).then(|| AdamState::new(&critic)),
        t: 0,
    };
    let mut curve = Vec::new();
    let mut best: Option<(usize, GaussianPolicy)> = None;
    let mut stats = Vec::with_capacity(config.episodes);
    let mut updates = 0usize;
    let dim = spec.dim();

    for episode in 0..config.episodes {
        let traj = next_reference(episode)?;
        let transitions = collect_episode(env, &actor, spec, &traj, &mut rng)?;
        let train_reward: f64 = transitions.iter().map(|t| t.r).sum();
        for t in transitions {
            buffer.push(t);
        }

        let mut loss_sum = 0.0;
        let mut clip_sum = 0.0;
        for _ in 0..config.epochs_per_episode {
            let batch = buffer.sample(config.batch_size, &mut rng);
            let n = batch.len();
            let mut states = Array2::zeros((n, dim));
            let mut next_states = Array2::zeros((n, dim));
            for (i, t) in batch.iter().enumerate() {
                states.row_mut(i).assign(&Array1::from(t.s.clone()));
                next_states.row_mut(i).assign(&Array1::from(t.s_next.clone()));
            }
            let rewards: Vec<f64> = batch.iter().map(|t| t.r).collect();
            let dones: Vec<bool> = batch.iter().map(|t| t.done && !config.bootstrap_time_limit).collect();
            let actions: Vec<f64> = batch.iter().map(|t| t.u).collect();
            let old_logps: Vec<f64> = batch.iter().map(|t| t.logp_old).collect();

            let next_values = target.predict(next_states.view())?;
            let next_values: Vec<f64> = next_values.column(0).to_vec();
            let targets = td_targets(&rewards, &next_values, &dones, config.gamma);

            // critic
            let (loss, mut cgrads) = critic_loss(&critic, states.view(), &targets)?;
            if let Some(adam) = opt.critic.as_mut() {
                adam.direction(&mut cgrads);
            }
            critic.sgd_ascend(&cgrads, -config.critic_lr)?;
            loss_sum += loss;

            // advantages from the updated critic
            let values = critic.predict(states.view())?;
            let deltas: Vec<f64> = targets.iter().zip(values.column(0)).map(|(y, v)| y - v).collect();
            // each replayed sample is its own segment
            let mut advantages: Vec<f64> = deltas
                .iter()
                .flat_map(|d| gae(&[*d], config.gamma, config.gae_lambda))
                .collect();
            if config.normalize_advantages && n > 1 {
                normalize(&mut advantages);
            }

            // actor
            let sur = clipped_surrogate(
                &actor,
                states.view(),
                &actions,
                &old_logps,
                &advantages,
                config.clip,
                config.entropy_coef,
            )?;
            clip_sum += sur.clip_fraction;
            let mut grads = sur.grads;
            if let Some((adam, (m, v))) = opt.actor.as_mut() {
                opt.t += 1;
                adam.direction(&mut grads.mean_net);
                let c1 = 1.0 - ADAM_BETA1.powi(opt.t);
                let c2 = 1.0 - ADAM_BETA2.powi(opt.t);
                adam_scalar(m, v, &mut grads.log_std, c1, c2);
            }
            actor.ascend(&grads, config.actor_lr)?;

            updates += 1;
            if updates.is_multiple_of(config.target_period) {
                target_soft_update(&mut target, &critic, config.tau)?;
            }
        }

        if !(actor.all_finite() && critic.all_finite()) {
            return Err(Error::Diverged {
                episode: episode + 1,
                detail: "non-finite network parameter".into(),
            });
        }
        let epochs = config.epochs_per_episode.max(1) as f64;
        stats.push(EpisodeStats {
            episode: episode + 1,
            train_reward,
            mean_critic_loss: loss_sum / epochs,
            mean_clip_fraction: clip_sum / epochs,
            std: actor.std(),
        });

        if let Some(eval_ref) = schedule.reference {
            if schedule.every > 0 && (episode + 1) % schedule.every == 0 {
                let trace = evaluate_policy(env, &actor, spec, eval_ref)?;
                if !trace.episodic_reward.is_finite() {
                    return Err(Error::Diverged {
                        episode: episode + 1,
                        detail: "non-finite evaluation reward".into(),
                    });
                }
                let point = EvalPoint {
                    episode: episode + 1,
                    reward: trace.episodic_reward,
                };
                on_eval(&point, &actor)?;
                curve.push(point);
                if best.as_ref().is_none_or(|(b, _)| curve[*b].reward < point.reward) {
                    best = Some((curve.len() - 1, actor.clone()));
                }
            }
        }
    }

    let (best_index, best_policy) = match best {
        Some((i, p)) => (Some(i), p),
        None => (None, actor.clone()),
    };
    Ok(TrainingRun {
        curve,
        best_index,
        best_policy,
        final_policy: actor,
        critic,
        stats,
    })
}

fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-12);
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    fn transition(r: f64) -> Transition {
        Transition {
            s: vec![r],
            u: 0.0,
            r,
            s_next: vec![r],
            logp_old: 0.0,
            done: false,
        }
    }

    #[test]
    fn td_error_examples() {
        assert_eq!(td_error(0.0, 0.0, 0.0, 0.7, false), 0.0);
        assert_eq!(td_error(-1.0, 0.0, -1.0, 0.7, false), 0.0);
        assert_eq!(td_error(-1.0, 100.0, 0.0, 0.7, true), -1.0);
    }

    #[test]
    fn gae_examples() {
        let d = [0.3, -1.2, 0.5];
        assert_eq!(gae(&d, 0.7, 0.0), d.to_vec());
        assert_eq!(gae(&[1.0, 1.0, 1.0], 1.0, 1.0), vec![3.0, 2.0, 1.0]);
        assert_eq!(gae(&[-0.25], 0.9, 0.9), vec![-0.25]);
    }

    #[test]
    fn buffer_fifo_and_sampling() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..8 {
            b.push(transition(i as f64));
        }
        assert_eq!(b.len(), 5);
        let kept: Vec<f64> = b.iter().map(|t| t.r).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = b.sample(100, &mut rng);
        assert_eq!(s.len(), 5);
        let mut seen: Vec<f64> = s.iter().map(|t| t.r).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, kept);
        assert_eq!(b.sample(2, &mut rng).len(), 2);
    }

    #[test]
    fn clip_cases() {
        let a = 2.0;
        assert_eq!(clipped_term(1.5, a, 0.1), (1.1 * a, false));
        let (v, active) = clipped_term(0.5, -a, 0.1);
        assert!((v - 0.9 * -a).abs() < 1e-15);
        assert!(!active);
        assert_eq!(clipped_term(1.0, a, 0.1), (a, true));
        assert_eq!(clipped_term(0.5, a, 0.1), (0.5 * a, true));
        assert_eq!(clipped_term(1.5, -a, 0.1), (-1.5 * a, true));
    }

    #[test]
    fn select_best_prefers_earliest_maximum() {
        let c = [
            EvalPoint {
                episode: 10,
                reward: -3.0,
            },
            EvalPoint {
                episode: 20,
                reward: -1.0,
            },
            EvalPoint {
                episode: 30,
                reward: -1.0,
            },
        ];
        assert_eq!(select_best(&c), Some(1));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn lambda_must_be_zero() {
        let cfg = PpoConfig {
            gae_lambda: 0.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(PpoConfig::default().validate().is_ok());
    }

    #[test]
    fn collect_episode_contract() {
        let env = TrackingEnv::new(EnvConfig::default()).unwrap();
        let cfg = PpoConfig {
            hidden1: 16,
            hidden2: 8,
            ..Default::default()
        };
        let spec = ArgumentSpec::residual(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (policy, _) = init_networks(&env, spec, &cfg, &mut rng).unwrap();
        let traj = ReferenceTrajectory::constant(200.0, 104);
        let a = collect_episode(&env, &policy, spec, &traj, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = collect_episode(&env, &policy, spec, &traj, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a[..99].iter().all(|t| !t.done));
        assert!(a[99].done);
        for w in a.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
        }
        assert!(a.iter().all(|t| t.r <= 0.0 && t.logp_old.is_finite() && t.u >= 0.0));
    }
}
