use std::time::Instant;

use rayon::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cmaes_step, CmaState};
use crate::sigcore::Path;
use crate::sigkernel::{BandwidthRule, SigKernelSpec, StaticKernelSpec};
use crate::steinopt::{
    mc_logpost_grad, stream_rng, svgd_step, Adam, BandwidthPolicy, Decoder, InferenceConfig, ParticleSet, PriorSpec,
    SteinKernel,
};
use crate::worlds::{pointmass_cost, PointMassConfig, PointMassEnv, StepRecord};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Controller {
    Sigsvgd,
    Svmpc,
    Mppi,
    Cmaes,
}

impl Controller {
    pub fn name(self) -> &'static str {
        match self {
            Controller::Sigsvgd => "sigsvgd",
            Controller::Svmpc => "svmpc",
            Controller::Mppi => "mppi",
            Controller::Cmaes => "cmaes",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sigsvgd" => Ok(Controller::Sigsvgd),
            "svmpc" => Ok(Controller::Svmpc),
            "mppi" => Ok(Controller::Mppi),
            "cmaes" => Ok(Controller::Cmaes),
            _ => Err(Error::invalid(format!("unknown controller `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: usize,
    pub policies: usize,
    /// Action samples per policy.
    pub samples: usize,
    /// Standard deviation of the action samples.
    pub control_std: f64,
    /// Standard deviation of the per-step Gaussian prior around each shifted policy.
    pub prior_std: f64,
    pub init_std: f64,
    /// Optimisation iterations per control step.
    pub iterations: usize,
    pub lr: f64,
    pub temperature: f64,
    pub sig_degree: usize,
    /// Vertices of the block-averaged control path the signature kernel
    /// compares; the horizon is split into this many runs of actions.
    pub kernel_points: usize,
    pub sig_bandwidth: f64,
    pub static_bandwidth: BandwidthPolicy,
    pub mppi_lambda: f64,
    /// Rollouts per MPPI iteration and CMA-ES population.
    pub batch: usize,
    pub primitives: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 30,
            policies: 30,
            samples: 10,
            control_std: 5.0,
            prior_std: 1.0,
            init_std: 1.0,
            iterations: 3,
            lr: 1.0,
            temperature: 1.0,
            sig_degree: 3,
            kernel_points: 10,
            sig_bandwidth: 5.65,
            static_bandwidth: BandwidthPolicy::PerStep { rule: BandwidthRule::Silverman },
            mppi_lambda: 1.0,
            batch: 300,
            primitives: true,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.policies == 0 || self.iterations == 0 {
            return Err(Error::invalid("horizon, policies and iterations must be positive"));
        }
        if self.kernel_points == 0 || self.kernel_points > self.horizon {
            return Err(Error::invalid("kernel_points must be between 1 and the horizon"));
        }
        if self.samples < 2 {
            return Err(Error::invalid("at least 2 action samples are required"));
        }
        if self.batch < 2 {
            return Err(Error::invalid("batch must be at least 2"));
        }
        for (name, v) in [
            ("control_std", self.control_std),
            ("prior_std", self.prior_std),
            ("lr", self.lr),
            ("temperature", self.temperature),
            ("sig_bandwidth", self.sig_bandwidth),
            ("mppi_lambda", self.mppi_lambda),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.init_std >= 0.0) {
            return Err(Error::invalid("init_std must be non-negative"));
        }
        Ok(())
    }

    fn inference(&self) -> InferenceConfig {
        InferenceConfig {
            temperature: self.temperature,
            mc_samples: self.samples,
            mc_noise: self.control_std,
            mc_alpha: self.temperature,
            step_size: self.lr,
            iterations: self.iterations,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub controller: Controller,
    pub seed: u64,
    /// Accrued running cost over the executed steps.
    pub cost: f64,
    pub steps: usize,
    pub crashed: bool,
    pub reached: bool,
    pub trajectory: Vec<StepRecord>,
    #[serde(skip)]
    pub wall_clock: f64,
}

/// Decodes a control sequence into the means of consecutive runs of
/// actions, prefixed by a zero vertex.
#[derive(Clone, Debug)]
struct BlockMeanDecoder {
    dim: usize,
    // run boundaries over action indices
    bounds: Vec<usize>,
}

impl BlockMeanDecoder {
    fn new(dim: usize, horizon: usize, blocks: usize) -> Self {
        let bounds = (0..=blocks).map(|b| b * horizon / blocks).collect();
        BlockMeanDecoder { dim, bounds }
    }
}

impl Decoder for BlockMeanDecoder {
    fn param_len(&self) -> usize {
        self.dim * self.bounds[self.bounds.len() - 1]
    }

    fn decode(&self, params: &[f64]) -> Path {
        let d = self.dim;
        let mut pts = vec![0.0; d];
        for w in self.bounds.windows(2) {
            let inv = 1.0 / (w[1] - w[0]) as f64;
            for k in 0..d {
                pts.push((w[0]..w[1]).map(|a| params[a * d + k]).sum::<f64>() * inv);
            }
        }
        let times = (0..pts.len() / d).map(|i| i as f64).collect();
        Path::new_unchecked(times, pts, d)
    }

    fn pullback(&self, _params: &[f64], vertex_grad: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; self.param_len()];
        for (b, w) in self.bounds.windows(2).enumerate() {
            let inv = 1.0 / (w[1] - w[0]) as f64;
            for a in w[0]..w[1] {
                for k in 0..d {
                    g[a * d + k] = vertex_grad[(b + 1) * d + k] * inv;
                }
            }
        }
        g
    }
}

/// Constant policies: no force and full force along each axis.
pub fn motion_primitives(horizon: usize, u_max: f64) -> Vec<Vec<f64>> {
    [[0.0, 0.0], [u_max, 0.0], [-u_max, 0.0], [0.0, u_max], [0.0, -u_max]]
        .iter()
        .map(|u| u.iter().copied().cycle().take(2 * horizon).collect())
        .collect()
}

/// Drops the first action and repeats the last one.
pub fn shift_hold(policy: &[f64], dim: usize) -> Vec<f64> {
    if policy.len() <= dim {
        return policy.to_vec();
    }
    let mut out = policy[dim..].to_vec();
    out.extend_from_slice(&policy[policy.len() - dim..]);
    out
}

/// Exponentially weighted average `Σ_j softmax(−C_j/λ) u_j`.
pub fn mppi_update(controls: &[Vec<f64>], costs: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if controls.is_empty() || controls.len() != costs.len() {
        return Err(Error::invalid("mppi needs one cost per rollout and at least one rollout"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("mppi temperature must be positive"));
    }
    let len = controls[0].len();
    let top = costs.iter().filter(|c| c.is_finite()).map(|c| -c / lambda).fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = if top.is_finite() {
        costs.iter().map(|c| if c.is_finite() { (-c / lambda - top).exp() } else { 0.0 }).collect()
    } else {
        log::warn!("all rollout costs are infinite; using uniform weights");
        vec![1.0; costs.len()]
    };
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    let mut u = vec![0.0; len];
    for (wj, c) in w.iter().zip(controls) {
        if *wj == 0.0 {
            continue;
        }
        for (a, b) in u.iter_mut().zip(c) {
            *a += wj * b;
        }
    }
    Ok(u)
}

// RNG stream purposes; the particle or sample index fills the low bits.
const INIT: u64 = 1 << 40;
const GRAD: u64 = 2 << 40;
const SELECT: u64 = 3 << 40;
const BATCH: u64 = 4 << 40;

fn noisy<R: Rng>(rng: &mut R, mean: &[f64], std: f64) -> Vec<f64> {
    mean.iter().map(|m| m + std * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Mean cost of `samples` noisy rollouts of each policy.
fn expected_costs(env: &PointMassEnv, world: &PointMassConfig, policies: &[Vec<f64>], cfg: &MpcConfig, seed: u64, step: usize) -> Vec<f64> {
    policies
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = stream_rng(seed, SELECT | i as u64, step as u64);
            (0..cfg.samples).map(|_| env.rollout_cost(world, &noisy(&mut rng, p, cfg.control_std))).sum::<f64>()
                / cfg.samples as f64
        })
        .collect()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, c) in v.iter().enumerate() {
        if c < &v[best] {
            best = i;
        }
    }
    best
}

struct Planner<'a> {
    world: &'a PointMassConfig,
    cfg: &'a MpcConfig,
    controller: Controller,
    seed: u64,
    primitives: Vec<Vec<f64>>,
    // Stein particles, the MPPI nominal or the CMA-ES mean
    policies: Vec<Vec<f64>>,
    // lives across control steps, shifted with the policies
    adam: Adam,
}

impl Planner<'_> {
    fn kernel(&self) -> (SteinKernel, BandwidthPolicy) {
        match self.controller {
            Controller::Sigsvgd => {
                let spec = SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(1.0), self.cfg.sig_degree)
                    .with_time_augment(true);
                (SteinKernel::Signature { spec, normalize: true }, BandwidthPolicy::Fixed { sigma: self.cfg.sig_bandwidth })
            }
            _ => (
                SteinKernel::Static { kernel: StaticKernelSpec::squared_exponential(1.0) },
                self.cfg.static_bandwidth,
            ),
        }
    }

    /// Optimises the policies from `env` and returns the action to execute.
    fn act(&mut self, env: &PointMassEnv, step: usize) -> Result<[f64; 2]> {
        let cfg = self.cfg;
        let h = cfg.horizon;
        let chosen = match self.controller {
            Controller::Sigsvgd | Controller::Svmpc => {
                let priors: Vec<PriorSpec> =
                    self.policies.iter().map(|p| PriorSpec::gaussian(p.clone(), vec![cfg.prior_std; 2 * h])).collect();
                let decoder = std::sync::Arc::new(BlockMeanDecoder::new(2, h, cfg.kernel_points));
                let mut ps = ParticleSet::new(self.policies.clone(), decoder)?;
                let (kernel, bw) = self.kernel();
                let inf = cfg.inference();
                let mut cached = None;
                for it in 0..cfg.iterations {
                    let counter = (step * cfg.iterations + it) as u64;
                    let grads: Vec<Vec<f64>> = ps
                        .params()
                        .par_iter()
                        .enumerate()
                        .map(|(i, x)| {
                            let mut rng = stream_rng(self.seed, GRAD | i as u64, counter);
                            mc_logpost_grad(x, |y| env.rollout_cost(self.world, y), Some(&priors[i]), &inf, &mut rng)
                        })
                        .collect::<Result<_>>()?;
                    let sigma = bw.resolve(&kernel.bandwidth_samples(&ps), &mut cached)?.sigma;
                    svgd_step(&mut ps, &grads, &kernel.with_bandwidth(sigma), 1.0, &mut self.adam)?;
                }
                self.policies = ps.params().to_vec();
                let mut all = self.policies.clone();
                all.extend(self.primitives.iter().cloned());
                let costs = expected_costs(env, self.world, &all, cfg, self.seed, step);
                let b = argmin(&costs);
                all.swap_remove(b)
            }
            Controller::Mppi => {
                let mut nominal = self.policies[0].clone();
                for it in 0..cfg.iterations {
                    let mut rng = stream_rng(self.seed, BATCH, (step * cfg.iterations + it) as u64);
                    let mut rollouts: Vec<Vec<f64>> =
                        (0..cfg.batch).map(|_| noisy(&mut rng, &nominal, cfg.control_std)).collect();
                    rollouts.extend(self.primitives.iter().cloned());
                    let costs: Vec<f64> = rollouts.par_iter().map(|u| env.rollout_cost(self.world, u)).collect();
                    nominal = mppi_update(&rollouts, &costs, cfg.mppi_lambda)?;
                }
                self.policies[0] = nominal.clone();
                nominal
            }
            Controller::Cmaes => {
                let mut st = CmaState::new(self.policies[0].clone(), cfg.control_std, cfg.batch)?;
                for it in 0..cfg.iterations {
                    let mut rng = stream_rng(self.seed, BATCH, (step * cfg.iterations + it) as u64);
                    let mut cands = st.sample(&mut rng);
                    cands.extend(self.primitives.iter().cloned());
                    let costs: Vec<f64> = cands.par_iter().map(|u| env.rollout_cost(self.world, u)).collect();
                    cmaes_step(&mut st, &cands, &costs)?;
                }
                let best = st.best.take().map(|b| b.0).unwrap_or_else(|| st.mean.clone());
                self.policies[0] = st.mean;
                best
            }
        };
        let u = [chosen[0].clamp(-self.world.u_max, self.world.u_max), chosen[1].clamp(-self.world.u_max, self.world.u_max)];
        for p in &mut self.policies {
            *p = shift_hold(p, 2);
        }
        self.adam.remap(|buf| buf.chunks(2 * h).flat_map(|c| shift_hold(c, 2)).collect());
        Ok(u)
    }
}

/// Runs one receding-horizon episode from the configured start.
pub fn mpc_episode(world: &PointMassConfig, controller: Controller, cfg: &MpcConfig, seed: u64) -> Result<EpisodeResult> {
    world.validate()?;
    cfg.validate()?;
    let started = Instant::now();
    let h = cfg.horizon;
    let count = match controller {
        Controller::Sigsvgd | Controller::Svmpc => cfg.policies,
        _ => 1,
    };
    let policies = (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, INIT | i as u64, 0);
            noisy(&mut rng, &vec![0.0; 2 * h], cfg.init_std)
        })
        .collect();
    let primitives = if cfg.primitives { motion_primitives(h, world.u_max) } else { Vec::new() };
    let adam = Adam::new(cfg.lr, count * 2 * h);
    let mut planner = Planner { world, cfg, controller, seed, primitives, policies, adam };
    let frozen = planner.primitives.clone();

    let mut env = PointMassEnv::new(world);
    let mut cost = 0.0;
    let mut trajectory = Vec::new();
    while !env.at_goal(world) && !env.crashed && trajectory.len() < world.max_steps {
        let step = trajectory.len();
        let u = planner.act(&env, step).map_err(|e| Error::numeric(format!("step {step}: {e}")))?;
        let collided = env.step(world, u);
        let c = pointmass_cost(env.pos, env.vel, u, world.goal, collided, world.penalty);
        cost += c;
        trajectory.push(StepRecord { pos: env.pos, vel: env.vel, action: u, cost: c, collided });
    }
    debug_assert!(planner.primitives == frozen);
    Ok(EpisodeResult {
        controller,
        seed,
        cost,
        steps: trajectory.len(),
        crashed: env.crashed,
        reached: env.at_goal(world),
        trajectory,
        wall_clock: started.elapsed().as_secs_f64(),
    })
}
