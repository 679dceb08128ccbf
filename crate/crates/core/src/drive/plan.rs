use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::sigcore::Path;
use crate::sigkernel::{BandwidthRule, SigKernelSpec, StaticKernelSpec};
use crate::steinopt::{
    anneal, mc_logpost_grad, stream_rng, svgd_step, Adam, BandwidthPolicy, InferenceConfig, ParticleSet, SteinKernel,
    TraceRecord,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Signature kernel on decoded paths.
    Sigsvgd,
    /// Squared-exponential kernel on flat parameters.
    Svmp,
    /// Independent Adam ascent, no kernel coupling.
    Bgd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sigsvgd => "sigsvgd",
            Method::Svmp => "svmp",
            Method::Bgd => "bgd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sigsvgd" => Ok(Method::Sigsvgd),
            "svmp" => Ok(Method::Svmp),
            "bgd" => Ok(Method::Bgd),
            _ => Err(Error::invalid(format!("unknown method `{s}`"))),
        }
    }
}

/// Kernels and bandwidth policies for each method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub signature: SigKernelSpec,
    pub normalize: bool,
    pub sig_bandwidth: BandwidthPolicy,
    pub static_bandwidth: BandwidthPolicy,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            signature: SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(1.0), 4).with_time_augment(true),
            normalize: true,
            sig_bandwidth: BandwidthPolicy::Fixed { sigma: 1.5 },
            static_bandwidth: BandwidthPolicy::PerStep { rule: BandwidthRule::Median },
        }
    }
}

/// A kernel together with the rule that sets its bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelChoice {
    pub kernel: SteinKernel,
    pub bandwidth: BandwidthPolicy,
}

impl KernelConfig {
    pub fn choice(&self, method: Method) -> KernelChoice {
        match method {
            Method::Sigsvgd => KernelChoice {
                kernel: SteinKernel::Signature { spec: self.signature.clone(), normalize: self.normalize },
                bandwidth: self.sig_bandwidth,
            },
            Method::Svmp => KernelChoice {
                kernel: SteinKernel::Static { kernel: StaticKernelSpec::squared_exponential(1.0) },
                bandwidth: self.static_bandwidth,
            },
            Method::Bgd => KernelChoice { kernel: SteinKernel::Identity, bandwidth: BandwidthPolicy::Fixed { sigma: 1.0 } },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub particles: usize,
    pub inference: InferenceConfig,
    pub kernel: KernelConfig,
    pub seed: u64,
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("at least one particle is required"));
        }
        self.inference.validate()?;
        self.kernel.signature.validate()
    }
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub params: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub best: usize,
    pub best_path: Path,
    pub trace: Vec<TraceRecord>,
    pub wall_clock: f64,
    pub seed: u64,
}

impl PlanResult {
    pub fn best_cost(&self) -> f64 {
        self.costs[self.best]
    }

    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }
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

/// Runs `method` on `problem`.
pub fn plan(problem: &dyn Problem, method: Method, cfg: &PlanConfig) -> Result<PlanResult> {
    plan_with(problem, &cfg.kernel.choice(method), cfg)
}

/// Runs SVGD with an explicit kernel; every method is this loop with a
/// different [`KernelChoice`].
pub fn plan_with(problem: &dyn Problem, choice: &KernelChoice, cfg: &PlanConfig) -> Result<PlanResult> {
    cfg.validate()?;
    let started = Instant::now();
    let inf = &cfg.inference;
    let init: Vec<Vec<f64>> = (0..cfg.particles)
        .map(|i| problem.sample_init(&mut stream_rng(cfg.seed, i as u64, 0)))
        .collect();
    let mut ps = ParticleSet::new(init, problem.kernel_decoder())?;
    let mut adam = Adam::new(inf.step_size, cfg.particles * problem.param_len());
    let mut cached_bw = None;
    let mut trace = Vec::with_capacity(inf.iterations);

    for it in 0..inf.iterations {
        let evals: Vec<(f64, Vec<f64>)> = ps
            .params()
            .par_iter()
            .enumerate()
            .map(|(i, x)| score(problem, x, inf, cfg.seed, i, it))
            .collect::<Result<_>>()
            .map_err(|e| Error::numeric(format!("iteration {it}: {e}")))?;
        let (costs, grads): (Vec<f64>, Vec<Vec<f64>>) = evals.into_iter().unzip();

        let (kernel, sigma) = if choice.kernel.uses_bandwidth() {
            let samples = choice.kernel.bandwidth_samples(&ps);
            let bw = choice.bandwidth.resolve(&samples, &mut cached_bw)?;
            (choice.kernel.with_bandwidth(bw.sigma), bw.sigma)
        } else {
            (choice.kernel.clone(), 0.0)
        };
        let mult = anneal(it, inf.iterations, inf.anneal);
        let stats = svgd_step(&mut ps, &grads, &kernel, mult, &mut adam)
            .map_err(|e| Error::numeric(format!("iteration {it}: {e}")))?;
        trace.push(TraceRecord { iter: it, costs, score_norms: stats.score_norms, bandwidth: sigma, anneal: mult });
    }

    let costs = ps.params().par_iter().map(|x| problem.cost(x)).collect::<Result<Vec<_>>>()?;
    let best = argmin(&costs);
    Ok(PlanResult {
        best_path: problem.output_path(&ps.params()[best]),
        params: ps.params().to_vec(),
        costs,
        best,
        trace,
        wall_clock: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}

/// Cost and log-posterior gradient of one particle.
fn score(problem: &dyn Problem, x: &[f64], inf: &InferenceConfig, seed: u64, i: usize, it: usize) -> Result<(f64, Vec<f64>)> {
    if inf.mc_samples > 0 {
        let cost = problem.cost(x)?;
        let mut rng = stream_rng(seed, i as u64, it as u64 + 1);
        let g = mc_logpost_grad(x, |y| problem.cost(y).unwrap_or(f64::INFINITY), problem.prior(), inf, &mut rng)?;
        return Ok((cost, g));
    }
    let (cost, cg) = problem.cost_grad(x)?;
    let mut g: Vec<f64> = cg.iter().map(|v| -inf.temperature * v).collect();
    if let Some(p) = problem.prior() {
        for (gk, pk) in g.iter_mut().zip(p.logpdf_grad(x)?.1) {
            *gk += pk;
        }
    }
    Ok((cost, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::QuadraticProblem;
    use crate::steinopt::Anneal;

    fn cfg(iters: usize, lr: f64) -> PlanConfig {
        PlanConfig {
            particles: 6,
            inference: InferenceConfig {
                step_size: lr,
                iterations: iters,
                anneal: Anneal::Cosine { min_mult: 0.0 },
                ..Default::default()
            },
            kernel: KernelConfig {
                signature: SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(1.0), 3).with_time_augment(true),
                ..Default::default()
            },
            seed: 3,
        }
    }

    #[test]
    fn convex_problem_all_methods_reach_optimum() {
        let q = QuadraticProblem::new(vec![0.5, -0.3, 0.2, 0.4], vec![1.0, 2.0, 1.5, 1.0], 2).unwrap();
        let mut c = cfg(20000, 5e-4);
        // with a fixed bandwidth the final spread of coupled particles is of order σ
        c.kernel.sig_bandwidth = BandwidthPolicy::Fixed { sigma: 1e-3 };
        let mut argmins = Vec::new();
        for m in [Method::Bgd, Method::Svmp, Method::Sigsvgd] {
            let r = plan(&q, m, &c).unwrap();
            argmins.push(r.params[r.best].clone());
            for x in &r.params {
                for (v, o) in x.iter().zip(&q.optimum) {
                    assert!((v - o).abs() < 1e-3, "{m:?}: {v} vs {o}");
                }
            }
            assert_eq!(r.trace.len(), 20000);
        }
        for a in &argmins[1..] {
            for (u, v) in a.iter().zip(&argmins[0]) {
                assert!((u - v).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn wide_signature_kernel_moves_the_mean() {
        let q = QuadraticProblem::new(vec![0.5, -0.3, 0.2, 0.4], vec![1.0, 2.0, 1.5, 1.0], 2).unwrap();
        let mut c = cfg(10000, 0.002);
        c.kernel.sig_bandwidth = BandwidthPolicy::Fixed { sigma: 1.5 };
        let r = plan(&q, Method::Sigsvgd, &c).unwrap();
        for (k, o) in q.optimum.iter().enumerate() {
            let mean = r.params.iter().map(|x| x[k]).sum::<f64>() / r.params.len() as f64;
            assert!((mean - o).abs() < 1e-3);
        }
    }

    #[test]
    fn deterministic_and_reducible() {
        let q = QuadraticProblem::new(vec![0.5, -0.3, 0.2, 0.4], vec![1.0, 2.0, 1.5, 1.0], 2).unwrap();
        let c = cfg(20, 0.05);
        let a = plan(&q, Method::Sigsvgd, &c).unwrap();
        let b = plan(&q, Method::Sigsvgd, &c).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.trace, b.trace);
        let svmp = plan(&q, Method::Svmp, &c).unwrap();
        let swapped = plan_with(&q, &c.kernel.choice(Method::Svmp), &c).unwrap();
        assert_eq!(svmp.trace, swapped.trace);
        let bgd = plan(&q, Method::Bgd, &c).unwrap();
        let ident = plan_with(&q, &KernelChoice { kernel: SteinKernel::Identity, bandwidth: BandwidthPolicy::Fixed { sigma: 1.0 } }, &c).unwrap();
        assert_eq!(bgd.trace, ident.trace);
    }
}
