//! Discrete PI baseline and its tuning by episodic-cost minimization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, EpisodeTrace, TrackingEnv};
use crate::error::{Error, Result};
use crate::references::ReferenceTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub k_p: f64,
    pub k_i: f64,
}

impl PiGains {
    pub fn new(k_p: f64, k_i: f64) -> Self {
        Self { k_p, k_i }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PiState {
    /// Accumulated error × time (rad).
    pub error_integral: f64,
}

/// How the signed PI request becomes a non-negative capacity torque.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiOutputMode {
    /// `|request|` when its sign agrees with the slip direction, else 0.
    #[default]
    SignMatched,
    /// `max(request, 0)`.
    ClampNegative,
}

/// Output mapping of the PI law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiLaw {
    pub mode: PiOutputMode,
    /// Constant torque added to every request (N·m).
    pub feedforward: f64,
}

impl PiLaw {
    pub fn plain(mode: PiOutputMode) -> Self {
        Self { mode, feedforward: 0.0 }
    }
}

/// One controller update: `request = k_p·e + k_i·∫e` after integrating `e·dt`.
pub fn pi_step(state: PiState, error: f64, gains: PiGains, dt: f64) -> (f64, PiState) {
    let error_integral = state.error_integral + error * dt;
    let request = gains.k_p * error + gains.k_i * error_integral;
    (request, PiState { error_integral })
}

/// Maps a signed torque request to a capacity torque.
pub fn capacity_from_request(request: f64, slip: f64, mode: PiOutputMode) -> f64 {
    match mode {
        PiOutputMode::ClampNegative => request.max(0.0),
        PiOutputMode::SignMatched => {
            let slip_positive = slip >= 0.0;
            let request_positive = request >= 0.0;
            if slip_positive == request_positive {
                request.abs()
            } else {
                0.0
            }
        }
    }
}

/// Closed-loop episode under PI control; also returns the largest `|∫e|` seen.
pub fn pi_rollout(
    env: &TrackingEnv,
    traj: &ReferenceTrajectory,
    gains: PiGains,
    law: PiLaw,
) -> Result<(EpisodeTrace, f64)> {
    let dt = env.config.drivetrain.dt;
    let ratio = env.ratio();
    let mut state = PiState::default();
    let mut max_integral = 0.0f64;
    let trace = rollout(env, traj, |ep| {
        let x = ep.state();
        let error = x.omega_in - traj.lookup(ep.k());
        let (request, next) = pi_step(state, error, gains, dt);
        state = next;
        max_integral = max_integral.max(state.error_integral.abs());
        Ok(capacity_from_request(
            law.feedforward + request,
            x.slip(ratio),
            law.mode,
        ))
    })?;
    Ok((trace, max_integral))
}

/// Mean over `refs` of the negated episodic reward (lower is better).
pub fn episodic_cost(gains: PiGains, refs: &[ReferenceTrajectory], env: &TrackingEnv, law: PiLaw) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::Config("episodic cost needs at least one reference".into()));
    }
    let mut total = 0.0;
    for traj in refs {
        total -= pi_rollout(env, traj, gains, law)?.0.episodic_reward;
    }
    Ok(total / refs.len() as f64)
}

/// Inclusive rectangular grid of gain candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k_p_min: f64,
    pub k_p_max: f64,
    pub k_p_points: usize,
    pub k_i_min: f64,
    pub k_i_max: f64,
    pub k_i_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            k_p_min: 0.0,
            k_p_max: 50.0,
            k_p_points: 20,
            k_i_min: 0.0,
            k_i_max: 25.0,
            k_i_points: 20,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k_p_points > 0
            && self.k_i_points > 0
            && self.k_p_min >= 0.0
            && self.k_i_min >= 0.0
            && self.k_p_max >= self.k_p_min
            && self.k_i_max >= self.k_i_min
            && self.k_p_max.is_finite()
            && self.k_i_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid PI grid {self:?}")))
        }
    }

    pub fn k_p_values(&self) -> Vec<f64> {
        linspace(self.k_p_min, self.k_p_max, self.k_p_points)
    }

    pub fn k_i_values(&self) -> Vec<f64> {
        linspace(self.k_i_min, self.k_i_max, self.k_i_points)
    }
}

/// Quasi-Newton refinement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineSpec {
    pub enabled: bool,
    /// Central-difference step in gain units.
    pub fd_step: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for RefineSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            fd_step: 1e-3,
            max_iter: 100,
            grad_tol: 1e-8,
        }
    }
}

/// One accepted iterate of the refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub k_p: f64,
    pub k_i: f64,
    pub cost: f64,
}

/// Tuning trace: grid costs, refinement path and the returned gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub k_p_values: Vec<f64>,
    pub k_i_values: Vec<f64>,
    /// `grid_costs[i][j]` is the cost at `(k_p_values[i], k_i_values[j])`.
    pub grid_costs: Vec<Vec<f64>>,
    pub grid_best: PathPoint,
    pub path: Vec<PathPoint>,
    pub gains: PiGains,
    pub cost: f64,
    /// Refinement failed or did worse, so the grid optimum was returned.
    pub fell_back: bool,
}

/// Grid search followed by BFGS with finite-difference gradients on an arbitrary cost.
pub fn tune_with<F>(cost: F, grid: &GridSpec, refine: &RefineSpec) -> Result<TuneReport>
where
    F: Fn(PiGains) -> Result<f64> + Sync,
{
    grid.validate()?;
    let kps = grid.k_p_values();
    let kis = grid.k_i_values();
    let cells: Vec<(usize, usize)> = (0..kps.len())
        .flat_map(|i| (0..kis.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| cost(PiGains::new(kps[i], kis[j])))
        .collect::<Result<_>>()?;
    let mut grid_costs = vec![vec![0.0; kis.len()]; kps.len()];
    let mut best: Option<PathPoint> = None;
    for (&(i, j), &c) in cells.iter().zip(&values) {
        grid_costs[i][j] = c;
        if c.is_finite() && best.is_none_or(|b| c < b.cost) {
            best = Some(PathPoint {
                k_p: kps[i],
                k_i: kis[j],
                cost: c,
            });
        }
    }
    let grid_best = best.ok_or_else(|| Error::NumericDomain("every grid cost is non-finite".into()))?;

    let mut path = vec![grid_best];
    let mut fell_back = false;
    let mut result = grid_best;
    if refine.enabled {
        match bfgs(&cost, [grid_best.k_p, grid_best.k_i], grid_best.cost, refine, &mut path) {
            Ok(p) if p.cost.is_finite() && p.cost <= grid_best.cost => result = p,
            Ok(p) => {
                log::warn!(
                    "PI refinement ended at cost {} above grid best {}; keeping grid gains",
                    p.cost,
                    grid_best.cost
                );
                fell_back = true;
            }
            Err(e) => {
                log::warn!("PI refinement failed ({e}); keeping grid gains");
                fell_back = true;
            }
        }
    }
    Ok(TuneReport {
        k_p_values: kps,
        k_i_values: kis,
        grid_costs,
        grid_best,
        path,
        gains: PiGains::new(result.k_p, result.k_i),
        cost: result.cost,
        fell_back,
    })
}

fn eval<F: Fn(PiGains) -> Result<f64>>(cost: &F, x: [f64; 2]) -> Result<f64> {
    cost(PiGains::new(x[0], x[1]))
}

fn fd_gradient<F: Fn(PiGains) -> Result<f64>>(cost: &F, x: [f64; 2], h: f64) -> Result<[f64; 2]> {
    let mut g = [0.0; 2];
    for d in 0..2 {
        let mut hi = x;
        let mut lo = x;
        hi[d] += h;
        lo[d] -= h;
        g[d] = (eval(cost, hi)? - eval(cost, lo)?) / (2.0 * h);
    }
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NumericDomain(format!("non-finite gradient at {x:?}")))
    }
}

fn bfgs<F: Fn(PiGains) -> Result<f64>>(
    cost: &F,
    start: [f64; 2],
    start_cost: f64,
    spec: &RefineSpec,
    path: &mut Vec<PathPoint>,
) -> Result<PathPoint> {
    let mut x = start;
    let mut f = start_cost;
    let mut g = fd_gradient(cost, x, spec.fd_step)?;
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..spec.max_iter {
        if g[0].hypot(g[1]) < spec.grad_tol {
            break;
        }
        let mut dir = [-(h[0][0] * g[0] + h[0][1] * g[1]), -(h[1][0] * g[0] + h[1][1] * g[1])];
        let mut slope = dir[0] * g[0] + dir[1] * g[1];
        if slope >= 0.0 {
            h = [[1.0, 0.0], [0.0, 1.0]];
            dir = [-g[0], -g[1]];
            slope = -(g[0] * g[0] + g[1] * g[1]);
        }
        // Armijo backtracking, kept inside the non-negative quadrant.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = [(x[0] + step * dir[0]).max(0.0), (x[1] + step * dir[1]).max(0.0)];
            let fc = eval(cost, cand)?;
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else { break };
        let g_new = fd_gradient(cost, x_new, spec.fd_step)?;
        let s = [x_new[0] - x[0], x_new[1] - x[1]];
        let y = [g_new[0] - g[0], g_new[1] - g[1]];
        let sy = s[0] * y[0] + s[1] * y[1];
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy = [h[0][0] * y[0] + h[0][1] * y[1], h[1][0] * y[0] + h[1][1] * y[1]];
            let yhy = y[0] * hy[0] + y[1] * hy[1];
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let moved = s[0].hypot(s[1]);
        x = x_new;
        f = f_new;
        g = g_new;
        path.push(PathPoint {
            k_p: x[0],
            k_i: x[1],
            cost: f,
        });
        if moved < 1e-12 {
            break;
        }
    }
    Ok(PathPoint {
        k_p: x[0],
        k_i: x[1],
        cost: f,
    })
}

/// Tunes PI gains on `refs` by minimizing [`episodic_cost`].
pub fn tune(
    refs: &[ReferenceTrajectory],
    env: &TrackingEnv,
    law: PiLaw,
    grid: &GridSpec,
    refine: &RefineSpec,
) -> Result<TuneReport> {
    if refs.is_empty() {
        return Err(Error::Config("PI tuning needs at least one reference".into()));
    }
    tune_with(|g| episodic_cost(g, refs, env, law), grid, refine)
}
