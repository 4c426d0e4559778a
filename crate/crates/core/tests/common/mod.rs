#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracking_ppo::drivetrain::{DriveTrainParams, DriveTrainState};
use tracking_ppo::nn::{Activation, MlpParams, ACTOR_ACTIVATIONS, CRITIC_ACTIVATIONS};
use tracking_ppo::policy::{gaussian_entropy, gaussian_log_density, gaussian_log_density_grad, GaussianPolicy};
use tracking_ppo::ppo::{clipped_surrogate, critic_loss};

/// Explicit Euler integration of the continuous two-inertia model over one step.
pub fn euler_step(p: &DriveTrainParams, s: DriveTrainState, t_cl: f64, t_in: f64, substeps: usize) -> DriveTrainState {
    let h = p.dt / substeps as f64;
    let (mut w_in, mut w_out) = (s.omega_in, s.omega_out);
    for _ in 0..substeps {
        let d_in = (-t_cl + t_in) / p.j_in;
        let d_out = (p.ratio * t_cl - p.eta * w_out) / p.j_out;
        w_in += h * d_in;
        w_out += h * d_out;
    }
    DriveTrainState::new(w_in, w_out)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom < 1e-300 {
        0.0
    } else {
        diff / denom
    }
}

/// Central differences of `f` around `x`.
pub fn fd_grad<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let hi = f(&p);
            p[i] = orig - h;
            let lo = f(&p);
            p[i] = orig;
            (hi - lo) / (2.0 * h)
        })
        .collect()
}

pub const FD_STEP: f64 = 1e-6;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * (2.0 * rng.random::<f64>() - 1.0))
}

fn small_net(rng: &mut ChaCha8Rng, acts: &[Activation; 3], out: usize) -> (MlpParams, usize) {
    let input = rng.random_range(2..6);
    let h1 = rng.random_range(3..8);
    let h2 = rng.random_range(3..8);
    let mut net = MlpParams::new(input, &[h1, h2, out], acts, rng).unwrap();
    // move output pre-activations away from the kink of the output rectifier
    let bias = if acts[2] == Activation::NegRelu { -1.5 } else { 1.5 };
    if rng.random::<f64>() < 0.8 {
        net.set_output_bias(bias);
    }
    (net, input)
}

/// Parameter and input gradient errors of `Σ c ⊙ net(x)` for one random instance.
pub fn network_gradient_error(seed: u64, critic: bool) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acts = if critic { CRITIC_ACTIVATIONS } else { ACTOR_ACTIVATIONS };
    let out = rng.random_range(1..3);
    let (net, input) = small_net(&mut rng, &acts, out);
    let batch = rng.random_range(1..5);
    let x = random_matrix(&mut rng, batch, input, 2.0);
    let c = random_matrix(&mut rng, batch, out, 1.0);
    let (_, cache) = net.forward(x.view()).unwrap();
    let (grads, grad_x) = net.backward(&cache, c.view()).unwrap();
    let objective = |n: &MlpParams, x: &Array2<f64>| (n.predict(x.view()).unwrap() * &c).sum();

    let theta = net.flatten();
    let mut probe = net.clone();
    let num = fd_grad(&theta, FD_STEP, |t| {
        probe.set_flat(t).unwrap();
        objective(&probe, &x)
    });
    let param_err = rel_err(&grads.flatten(), &num);

    let flat_x: Vec<f64> = x.iter().copied().collect();
    let num_x = fd_grad(&flat_x, FD_STEP, |v| {
        let xv = Array2::from_shape_vec(x.dim(), v.to_vec()).unwrap();
        objective(&net, &xv)
    });
    let input_err = rel_err(&grad_x.iter().copied().collect::<Vec<_>>(), &num_x);
    (param_err, input_err)
}

fn small_policy(rng: &mut ChaCha8Rng) -> (GaussianPolicy, usize) {
    let (net, input) = small_net(rng, &ACTOR_ACTIVATIONS, 1);
    let std = rng.random_range(0.3..3.0);
    (GaussianPolicy::new(net, std).unwrap(), input)
}

fn policy_flat(p: &GaussianPolicy) -> Vec<f64> {
    let mut v = p.mean_net.flatten();
    v.push(p.log_std);
    v
}

fn set_policy_flat(p: &mut GaussianPolicy, v: &[f64]) {
    let n = v.len() - 1;
    p.mean_net.set_flat(&v[..n]).unwrap();
    p.log_std = v[n];
}

/// Error of the gradient of `Σ_i log π(u_i | s_i)` w.r.t. network weights and `log_std`.
pub fn logprob_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (policy, input) = small_policy(&mut rng);
    let batch = rng.random_range(1..5);
    let s = random_matrix(&mut rng, batch, input, 2.0);
    let (means, cache) = policy.mean_batch(s.view()).unwrap();
    let u: Vec<f64> = means.iter().map(|m| m + rng.random_range(-2.0..2.0)).collect();
    let mut g_out = Array2::zeros((batch, 1));
    let mut g_log_std = 0.0;
    for i in 0..batch {
        let (dm, ds) = gaussian_log_density_grad(means[i], policy.log_std, u[i]);
        g_out[[i, 0]] = dm;
        g_log_std += ds;
    }
    let (g_net, _) = policy.mean_net.backward(&cache, g_out.view()).unwrap();
    let mut analytic = g_net.flatten();
    analytic.push(g_log_std);

    let mut probe = policy.clone();
    let num = fd_grad(&policy_flat(&policy), FD_STEP, |v| {
        set_policy_flat(&mut probe, v);
        (0..batch)
            .map(|i| probe.logprob(s.row(i).as_slice().unwrap(), u[i]).unwrap())
            .sum()
    });
    rel_err(&analytic, &num)
}

/// Error of d S / d log_std against central differences of the entropy.
pub fn entropy_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_std: f64 = rng.random_range(-3.0..3.0);
    let num = fd_grad(&[log_std], FD_STEP, |v| gaussian_entropy(v[0]));
    rel_err(&[1.0], &num)
}

/// Error of the log-density partials against central differences.
pub fn density_partials_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = rng.random_range(-5.0..5.0);
    let log_std = rng.random_range(-2.0..2.0);
    let u = rng.random_range(-5.0..5.0);
    let (dm, ds) = gaussian_log_density_grad(mean, log_std, u);
    let num = fd_grad(&[mean, log_std], FD_STEP, |v| gaussian_log_density(v[0], v[1], u));
    rel_err(&[dm, ds], &num)
}

/// Error of the clipped-surrogate gradient (entropy bonus included).
pub fn surrogate_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (policy, input) = small_policy(&mut rng);
    let batch = rng.random_range(2..6);
    let s = random_matrix(&mut rng, batch, input, 2.0);
    let (means, _) = policy.mean_batch(s.view()).unwrap();
    let u: Vec<f64> = means
        .iter()
        .map(|m| (m + rng.random_range(-1.0..1.0)).max(0.0))
        .collect();
    let old: Vec<f64> = (0..batch)
        .map(|i| gaussian_log_density(means[i], policy.log_std, u[i]) + rng.random_range(-0.3..0.3))
        .collect();
    let adv: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();
    let clip = 0.1;
    let ent = 0.01;
    let out = clipped_surrogate(&policy, s.view(), &u, &old, &adv, clip, ent).unwrap();
    let mut analytic = out.grads.mean_net.flatten();
    analytic.push(out.grads.log_std);
    let mut probe = policy.clone();
    let num = fd_grad(&policy_flat(&policy), FD_STEP, |v| {
        set_policy_flat(&mut probe, v);
        clipped_surrogate(&probe, s.view(), &u, &old, &adv, clip, ent)
            .unwrap()
            .objective
    });
    rel_err(&analytic, &num)
}

/// Error of the critic mean-squared-error gradient.
pub fn critic_loss_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (net, input) = small_net(&mut rng, &CRITIC_ACTIVATIONS, 1);
    let batch = rng.random_range(1..6);
    let s = random_matrix(&mut rng, batch, input, 2.0);
    let y: Vec<f64> = (0..batch).map(|_| rng.random_range(-4.0..0.0)).collect();
    let (_, grads) = critic_loss(&net, s.view(), &y).unwrap();
    let mut probe = net.clone();
    let num = fd_grad(&net.flatten(), FD_STEP, |v| {
        probe.set_flat(v).unwrap();
        critic_loss(&probe, s.view(), &y).unwrap().0
    });
    rel_err(&grads.flatten(), &num)
}

/// Brute-force `min(p·A, clip(p, 1 − c, 1 + c)·A)`.
pub fn brute_clipped(p: f64, a: f64, c: f64) -> f64 {
    let clipped = if p < 1.0 - c {
        1.0 - c
    } else if p > 1.0 + c {
        1.0 + c
    } else {
        p
    };
    let x = p * a;
    let y = clipped * a;
    if x < y {
        x
    } else {
        y
    }
}

/// Expected clipped value from the sign of `A` and the position of `p` relative to the band.
pub fn case_clipped(p: f64, a: f64, c: f64) -> f64 {
    if a >= 0.0 {
        // positive advantage: only ratios above the band are cut
        if p > 1.0 + c {
            (1.0 + c) * a
        } else {
            p * a
        }
    } else if p < 1.0 - c {
        (1.0 - c) * a
    } else {
        p * a
    }
}

/// Random triples `(p, A, c)` covering ratios inside and outside the clip band.
pub fn random_triples(seed: u64, n: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = (rng.random_range(-3.0f64..3.0)).exp();
            let a = rng.random_range(-10.0..10.0);
            let c = rng.random_range(0.01..0.99);
            (p, a, c)
        })
        .collect()
}
