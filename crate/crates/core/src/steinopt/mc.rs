use rand::Rng;
use rand_distr::StandardNormal;

use super::{InferenceConfig, PriorSpec};
use crate::{Error, Result};

/// Monte Carlo estimate of `∇ log (1/N_s) Σ_j exp(−α C(x + ε_j))` plus the
/// analytic prior gradient.
///
/// With `ε_j ~ N(0, α_noise² I)` each cost gradient is estimated by the
/// score-function form `(C_j − C̄) ε_j / α_noise²` and the estimates are
/// combined with weights `softmax(−α C_j)`. Non-finite costs get zero
/// weight.
pub fn mc_logpost_grad<R: Rng + ?Sized>(
    particle: &[f64],
    cost: impl Fn(&[f64]) -> f64,
    prior: Option<&PriorSpec>,
    cfg: &InferenceConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let ns = cfg.mc_samples;
    if ns < 2 {
        return Err(Error::invalid("Monte Carlo gradients need at least 2 samples"));
    }
    let p = particle.len();
    let sd = cfg.mc_noise;
    let mut eps = vec![0.0; ns * p];
    let mut costs = Vec::with_capacity(ns);
    let mut sample = vec![0.0; p];
    for j in 0..ns {
        let e = &mut eps[j * p..(j + 1) * p];
        for (k, ek) in e.iter_mut().enumerate() {
            *ek = sd * rng.sample::<f64, _>(StandardNormal);
            sample[k] = particle[k] + *ek;
        }
        costs.push(cost(&sample));
    }
    let finite: Vec<usize> = (0..ns).filter(|&j| costs[j].is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::numeric("all Monte Carlo costs are non-finite"));
    }
    let mean = finite.iter().map(|&j| costs[j]).sum::<f64>() / finite.len() as f64;
    let a = cfg.mc_alpha;
    let top = finite.iter().map(|&j| -a * costs[j]).fold(f64::NEG_INFINITY, f64::max);
    let mut w = vec![0.0; ns];
    let mut z = 0.0;
    for &j in &finite {
        w[j] = (-a * costs[j] - top).exp();
        z += w[j];
    }
    let mut g = match prior {
        Some(pr) => pr.logpdf_grad(particle)?.1,
        None => vec![0.0; p],
    };
    let inv_var = 1.0 / (sd * sd);
    for &j in &finite {
        let f = -a * (w[j] / z) * (costs[j] - mean) * inv_var;
        for (gk, ek) in g.iter_mut().zip(&eps[j * p..(j + 1) * p]) {
            *gk += f * ek;
        }
    }
    Ok(g)
}
