mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tracking_ppo::env::{EnvConfig, TrackingEnv};
use tracking_ppo::nn::{MlpParams, CRITIC_ACTIVATIONS};
use tracking_ppo::ppo::{
    clipped_term, critic_update, evaluate_policy, gae, init_networks, select_best, target_soft_update, td_error, train,
    EvalPoint, EvalSchedule, PpoConfig, ReplayBuffer, Transition,
};
use tracking_ppo::references::{generate, ReferenceClass, ReferenceGenConfig, ReferenceTrajectory};
use tracking_ppo::tracking::ArgumentSpec;

proptest! {
    #[test]
    fn lambda_zero_gae_is_td_error(deltas in prop::collection::vec(-100.0f64..100.0, 0..50), gamma in 0.0f64..1.0) {
        prop_assert_eq!(gae(&deltas, gamma, 0.0), deltas);
    }

    #[test]
    fn gae_recursion(deltas in prop::collection::vec(-10.0f64..10.0, 1..30), gamma in 0.0f64..1.0, lambda in 0.0f64..1.0) {
        let a = gae(&deltas, gamma, lambda);
        let n = deltas.len();
        prop_assert_eq!(a[n - 1], deltas[n - 1]);
        for t in 0..n - 1 {
            prop_assert!((a[t] - (deltas[t] + gamma * lambda * a[t + 1])).abs() < 1e-9);
        }
    }

    #[test]
    fn td_error_masks_terminal(r in -10.0f64..0.0, v_next in -100.0f64..100.0, v in -100.0f64..100.0, gamma in 0.0f64..1.0) {
        prop_assert_eq!(td_error(r, v_next, v, gamma, true), r - v);
        prop_assert_eq!(td_error(r, v_next, v, gamma, false), r + gamma * v_next - v);
    }

    #[test]
    fn buffer_keeps_newest(cap in 1usize..40, pushes in 0usize..120, want in 0usize..60, seed in 0u64..1000) {
        let mut b = ReplayBuffer::new(cap);
        for i in 0..pushes {
            b.push(Transition { s: vec![], u: 0.0, r: i as f64, s_next: vec![], logp_old: 0.0, done: false });
        }
        prop_assert_eq!(b.len(), pushes.min(cap));
        let first = pushes.saturating_sub(cap) as f64;
        if let Some(t) = b.get(0) {
            prop_assert_eq!(t.r, first);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = b.sample(want, &mut rng);
        prop_assert_eq!(s.len(), want.min(b.len()));
        let mut seen: Vec<f64> = s.iter().map(|t| t.r).collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        prop_assert_eq!(seen.len(), s.len());
    }
}

#[test]
fn clipped_never_exceeds_unclipped() {
    for (p, a, c) in common::random_triples(1, 10_000) {
        let (v, _) = clipped_term(p, a, c);
        assert!(v <= p * a, "p={p} a={a} c={c}");
    }
}

#[test]
fn clipped_case_table_matches_brute_force() {
    for (p, a, c) in common::random_triples(2, 10_000) {
        let (v, _) = clipped_term(p, a, c);
        assert_eq!(v, common::brute_clipped(p, a, c));
        assert!((v - common::case_clipped(p, a, c)).abs() <= 1e-12 * (1.0 + v.abs()));
    }
    for c in [0.1, 0.2] {
        for a in [-1.0, 0.0, 1.0] {
            for p in [0.5, 1.0 - c, 1.0, 1.0 + c, 2.0] {
                let (v, _) = clipped_term(p, a, c);
                assert!((v - common::case_clipped(p, a, c)).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn soft_update_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = MlpParams::new(4, &[6, 5, 1], &CRITIC_ACTIVATIONS, &mut rng).unwrap();
    let b = MlpParams::new(4, &[6, 5, 1], &CRITIC_ACTIVATIONS, &mut rng).unwrap();
    let mut t = a.clone();
    target_soft_update(&mut t, &b, 0.0).unwrap();
    assert_eq!(t.flatten(), a.flatten());
    target_soft_update(&mut t, &b, 1.0).unwrap();
    assert_eq!(t.flatten(), b.flatten());
    let mut half = a.clone();
    target_soft_update(&mut half, &b, 0.5).unwrap();
    for ((h, x), y) in half.flatten().iter().zip(a.flatten()).zip(b.flatten()) {
        assert!((h - 0.5 * (x + y)).abs() < 1e-15);
    }
    assert!(target_soft_update(&mut t, &b, 1.5).is_err());
}

#[test]
fn critic_step_reduces_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut critic = MlpParams::new(3, &[16, 8, 1], &CRITIC_ACTIVATIONS, &mut rng).unwrap();
    critic.set_output_bias(-0.5);
    let s = Array2::from_shape_fn((20, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
    let y: Vec<f64> = (0..20).map(|i| -1.0 - 0.1 * i as f64).collect();
    let before = critic_update(&mut critic, s.view(), &y, 1e-3).unwrap();
    let after = critic_update(&mut critic, s.view(), &y, 0.0).unwrap();
    assert!(after < before);
}

#[test]
fn best_selection_is_reproducible_from_curve() {
    let curve: Vec<EvalPoint> = [-5.0, -2.0, -3.0, -2.0, -4.0]
        .iter()
        .enumerate()
        .map(|(i, r)| EvalPoint {
            episode: 10 * (i + 1),
            reward: *r,
        })
        .collect();
    assert_eq!(select_best(&curve), Some(1));
}

fn tiny_config(episodes: usize) -> PpoConfig {
    PpoConfig {
        episodes,
        epochs_per_episode: 5,
        batch_size: 32,
        hidden1: 16,
        hidden2: 8,
        ..Default::default()
    }
}

fn run_tiny(seed: u64) -> tracking_ppo::ppo::TrainingRun {
    let env = TrackingEnv::new(EnvConfig::default()).unwrap();
    let rc = ReferenceGenConfig::default();
    let eval = generate(ReferenceClass::Smooth, &rc, 999).unwrap();
    train(
        &env,
        ArgumentSpec::residual(1),
        &tiny_config(20),
        EvalSchedule {
            every: 10,
            reference: Some(&eval),
        },
        seed,
        |e| generate(ReferenceClass::Smooth, &rc, e as u64),
        |_, _| Ok(()),
    )
    .unwrap()
}

#[test]
fn training_is_deterministic_and_follows_schedule() {
    let a = run_tiny(5);
    let b = run_tiny(5);
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.best_policy, b.best_policy);
    assert_eq!(a.curve.len(), 2);
    assert_eq!(a.curve.iter().map(|p| p.episode).collect::<Vec<_>>(), vec![10, 20]);
    assert_eq!(a.best_index, select_best(&a.curve));
    assert_eq!(a.stats.len(), 20);
    let c = run_tiny(6);
    assert_ne!(a.curve, c.curve);
}

#[test]
fn evaluation_rejects_mismatched_argument() {
    let env = TrackingEnv::new(EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (policy, _) = init_networks(&env, ArgumentSpec::residual(3), &tiny_config(1), &mut rng).unwrap();
    let traj = ReferenceTrajectory::constant(200.0, 104);
    assert!(evaluate_policy(&env, &policy, ArgumentSpec::current(), &traj).is_err());
    let t = evaluate_policy(&env, &policy, ArgumentSpec::residual(3), &traj).unwrap();
    assert_eq!(t.rows.len(), 100);
    assert_eq!(
        t,
        evaluate_policy(&env, &policy, ArgumentSpec::residual(3), &traj).unwrap()
    );
}
