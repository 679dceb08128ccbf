use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Adam, ParticleSet};
use crate::sigkernel::{bandwidth_heuristic, kernel_with_grads, Bandwidth, BandwidthRule, SigKernelSpec, StaticKernelSpec, StaticKind};
use crate::{Error, Result};

/// Kernel used in the Stein update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SteinKernel {
    /// No coupling: each particle follows its own gradient.
    Identity,
    /// Static kernel on the flat parameter vectors.
    Static { kernel: StaticKernelSpec },
    /// Signature kernel on decoded paths, optionally normalized to
    /// `k(x, y) / √(k(x, x) k(y, y))`.
    Signature { spec: SigKernelSpec, normalize: bool },
}

/// How the squared-exponential bandwidth is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BandwidthPolicy {
    Fixed { sigma: f64 },
    /// Recomputed from the particles every step.
    PerStep { rule: BandwidthRule },
    /// Computed once from the initial particles.
    Initial { rule: BandwidthRule },
}

impl BandwidthPolicy {
    /// Bandwidth for this step; `cached` holds the value of an `Initial` rule.
    pub fn resolve(&self, samples: &[Vec<f64>], cached: &mut Option<f64>) -> Result<Bandwidth> {
        match *self {
            BandwidthPolicy::Fixed { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid("fixed bandwidth must be positive"));
                }
                Ok(Bandwidth { sigma, degenerate: false })
            }
            BandwidthPolicy::PerStep { rule } => bandwidth_heuristic(samples, rule),
            BandwidthPolicy::Initial { rule } => match cached {
                Some(sigma) => Ok(Bandwidth { sigma: *sigma, degenerate: false }),
                None => {
                    let b = bandwidth_heuristic(samples, rule)?;
                    *cached = Some(b.sigma);
                    Ok(b)
                }
            },
        }
    }
}

impl SteinKernel {
    /// Copy with the squared-exponential bandwidth replaced.
    pub fn with_bandwidth(&self, sigma: f64) -> SteinKernel {
        let mut k = self.clone();
        match &mut k {
            SteinKernel::Static { kernel } => kernel.bandwidth = sigma,
            SteinKernel::Signature { spec, .. } => spec.static_kernel.bandwidth = sigma,
            SteinKernel::Identity => {}
        }
        k
    }

    pub fn uses_bandwidth(&self) -> bool {
        match self {
            SteinKernel::Identity => false,
            SteinKernel::Static { kernel } => kernel.kind == StaticKind::SquaredExponential,
            SteinKernel::Signature { spec, .. } => spec.static_kernel.kind == StaticKind::SquaredExponential,
        }
    }

    /// Points a bandwidth rule is computed from: the parameter vectors for a
    /// static kernel, all decoded vertices for a signature kernel.
    pub fn bandwidth_samples(&self, ps: &ParticleSet) -> Vec<Vec<f64>> {
        match self {
            SteinKernel::Signature { .. } => ps
                .decode_all()
                .iter()
                .flat_map(|p| (0..p.len()).map(|i| p.vertex(i).to_vec()).collect::<Vec<_>>())
                .collect(),
            _ => ps.params().to_vec(),
        }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct StepStats {
    pub score_norms: Vec<f64>,
    /// Mean off-diagonal kernel value.
    pub mean_kernel: f64,
}

/// `k(y_i, x_j)` and `∇_{y_i} k(y_i, x_j)` in parameter space, row-major.
struct Coupling {
    k: Vec<f64>,
    grad: Vec<Vec<f64>>,
}

fn static_coupling(ps: &ParticleSet, kernel: &StaticKernelSpec) -> Coupling {
    let n = ps.len();
    let p = ps.param_len();
    let x = ps.params();
    let mut k = vec![0.0; n * n];
    let mut grad = vec![vec![0.0; p]; n * n];
    for i in 0..n {
        for j in 0..n {
            let kv = kernel.eval_unchecked(&x[i], &x[j]);
            k[i * n + j] = kv;
            // ∂k(y, x)/∂y at y = x_i, x = x_j
            kernel.add_grad_second(&x[j], &x[i], kv, 1.0, &mut grad[i * n + j]);
        }
    }
    Coupling { k, grad }
}

fn signature_coupling(ps: &ParticleSet, spec: &SigKernelSpec, normalize: bool) -> Result<Coupling> {
    let n = ps.len();
    let p = ps.param_len();
    let paths = ps.decode_all();
    let params = ps.params();
    let dec = ps.decoder();

    // rows i: pairs (i, j) for j ≥ i
    let rows: Vec<Vec<(f64, Vec<f64>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    let e = kernel_with_grads(&paths[i], &paths[j], spec)
                        .map_err(|e| Error::numeric(format!("kernel between particles {i} and {j}: {e}")))?;
                    Ok((e.value, e.grad_x.values, e.grad_y.values))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let pair = |i: usize, j: usize| &rows[i.min(j)][i.max(j) - i.min(j)];

    // self values and total self gradients
    let selfv: Vec<f64> = (0..n).map(|i| pair(i, i).0).collect();
    let self_total: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let (_, gx, gy) = pair(i, i);
            gx.iter().zip(gy).map(|(a, b)| a + b).collect()
        })
        .collect();
    if normalize && selfv.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::numeric("non-positive signature kernel self-similarity"));
    }

    let mut k = vec![0.0; n * n];
    let mut grad = vec![vec![0.0; p]; n * n];
    for i in 0..n {
        for j in 0..n {
            let (v, gx, gy) = pair(i, j);
            // gradient of k(path_i, path_j) w.r.t. path_i
            let gi = if i <= j { gx } else { gy };
            let idx = i * n + j;
            if normalize {
                if params[i] == params[j] {
                    k[idx] = 1.0;
                    continue;
                }
                let norm = (selfv[i] * selfv[j]).sqrt();
                let kt = v / norm;
                k[idx] = kt;
                let vg: Vec<f64> = gi
                    .iter()
                    .zip(&self_total[i])
                    .map(|(a, t)| a / norm - 0.5 * kt * t / selfv[i])
                    .collect();
                grad[idx] = dec.pullback(&params[i], &vg);
            } else {
                k[idx] = *v;
                let g = if i == j { &pair(i, i).1 } else { gi };
                grad[idx] = dec.pullback(&params[i], g);
            }
        }
    }
    Ok(Coupling { k, grad })
}

/// One synchronous SVGD update with Adam:
/// `φ(x_j) = (1/n) Σ_i [k(y_i, x_j) g_i + r ∇_{y_i} k(y_i, x_j)]`.
///
/// The identity kernel skips the average and uses `φ(x_j) = g_j`.
pub fn svgd_step(
    ps: &mut ParticleSet,
    grads: &[Vec<f64>],
    kernel: &SteinKernel,
    repulsion_mult: f64,
    adam: &mut Adam,
) -> Result<StepStats> {
    let n = ps.len();
    let p = ps.param_len();
    if grads.len() != n || grads.iter().any(|g| g.len() != p) {
        return Err(Error::invalid("one gradient of parameter length is needed per particle"));
    }
    if let Some(i) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::numeric(format!("non-finite score for particle {i}")));
    }
    let coupling = match kernel {
        SteinKernel::Identity => None,
        SteinKernel::Static { kernel } => {
            kernel.validate()?;
            Some(static_coupling(ps, kernel))
        }
        SteinKernel::Signature { spec, normalize } => Some(signature_coupling(ps, spec, *normalize)?),
    };

    let mut phi = vec![0.0; n * p];
    let mut mean_kernel = 0.0;
    match &coupling {
        None => {
            for (j, g) in grads.iter().enumerate() {
                phi[j * p..(j + 1) * p].copy_from_slice(g);
            }
        }
        Some(c) => {
            let inv_n = 1.0 / n as f64;
            for j in 0..n {
                let out = &mut phi[j * p..(j + 1) * p];
                for i in 0..n {
                    let kij = c.k[i * n + j];
                    let gk = &c.grad[i * n + j];
                    for ((o, g), r) in out.iter_mut().zip(&grads[i]).zip(gk) {
                        *o += kij * g + repulsion_mult * r;
                    }
                }
                out.iter_mut().for_each(|o| *o *= inv_n);
            }
            if n > 1 {
                let off: f64 = (0..n * n).filter(|ix| ix / n != ix % n).map(|ix| c.k[ix]).sum();
                mean_kernel = off / (n * (n - 1)) as f64;
            }
        }
    }
    if phi.iter().any(|v| !v.is_finite()) {
        let i = phi.chunks(p).position(|c| c.iter().any(|v| !v.is_finite())).unwrap_or(0);
        return Err(Error::numeric(format!("non-finite update for particle {i}")));
    }
    let score_norms = phi.chunks(p).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut flat = ps.flat();
    adam.step(&mut flat, &phi);
    ps.set_flat(&flat);
    Ok(StepStats { score_norms, mean_kernel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigkernel::SigKernelSpec;
    use crate::steinopt::{Decoder, SequenceDecoder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn set(params: Vec<Vec<f64>>, dim: usize, steps: usize) -> ParticleSet {
        let d: Arc<dyn Decoder> = Arc::new(SequenceDecoder::anchored(dim, steps, vec![0.0; dim]).unwrap());
        ParticleSet::new(params, d).unwrap()
    }

    #[test]
    fn single_particle_is_plain_adam() {
        let mut ps = set(vec![vec![0.3, -0.2]], 1, 2);
        let mut a1 = Adam::new(0.1, 2);
        let mut a2 = Adam::new(0.1, 2);
        let mut x = vec![0.3, -0.2];
        let k = SteinKernel::Static { kernel: StaticKernelSpec::squared_exponential(0.7) };
        for it in 0..5 {
            let g = vec![vec![1.0 + it as f64, -0.5]];
            svgd_step(&mut ps, &g, &k, 1.0, &mut a1).unwrap();
            a2.step(&mut x, &g[0]);
        }
        assert_eq!(ps.params()[0], x);
    }

    #[test]
    fn identical_particles_with_zero_gradient_stay_put() {
        for k in [
            SteinKernel::Static { kernel: StaticKernelSpec::squared_exponential(1.0) },
            SteinKernel::Signature { spec: SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(1.0), 3), normalize: true },
        ] {
            let mut ps = set(vec![vec![0.5, 0.1, 0.2, 0.4]; 4], 2, 2);
            let before = ps.params().to_vec();
            let mut adam = Adam::new(0.1, 16);
            let st = svgd_step(&mut ps, &vec![vec![0.0; 4]; 4], &k, 1.0, &mut adam).unwrap();
            assert!(st.score_norms.iter().all(|v| *v == 0.0));
            assert_eq!(ps.params(), &before[..]);
        }
    }

    #[test]
    fn non_finite_score_names_particle() {
        let mut ps = set(vec![vec![0.0, 0.0]; 3], 1, 2);
        let mut g = vec![vec![0.0, 0.0]; 3];
        g[2][1] = f64::NAN;
        let e = svgd_step(&mut ps, &g, &SteinKernel::Identity, 1.0, &mut Adam::new(0.1, 6)).unwrap_err();
        assert!(e.to_string().contains("particle 2"));
    }

    #[test]
    fn repulsion_separates_two_particles() {
        for k in [
            SteinKernel::Static { kernel: StaticKernelSpec::squared_exponential(1.0) },
            SteinKernel::Signature { spec: SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(1.0), 3), normalize: true },
            SteinKernel::Signature { spec: SigKernelSpec::pde(StaticKernelSpec::squared_exponential(1.0), 0), normalize: false },
        ] {
            let mut ps = set(vec![vec![0.1, 0.0], vec![-0.1, 0.0]], 1, 2);
            let gap = |ps: &ParticleSet| (ps.params()[0][0] - ps.params()[1][0]).abs();
            let g0 = gap(&ps);
            let mut adam = Adam::new(0.01, 4);
            for _ in 0..10 {
                svgd_step(&mut ps, &vec![vec![0.0; 2]; 2], &k, 1.0, &mut adam).unwrap();
            }
            assert!(gap(&ps) > g0, "{k:?}");
        }
    }

    /// Normalized signature repulsion equals a finite difference of k̃.
    #[test]
    fn normalized_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let spec = SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(0.8), 4);
        let ps = set(params.clone(), 2, 3);
        let c = signature_coupling(&ps, &spec, true).unwrap();
        let dec = SequenceDecoder::anchored(2, 3, vec![0.0; 2]).unwrap();
        let kt = |a: &[f64], b: &[f64]| {
            let (pa, pb) = (dec.decode(a), dec.decode(b));
            let kab = crate::sigkernel::sig_kernel(&pa, &pb, &spec).unwrap();
            let kaa = crate::sigkernel::sig_kernel(&pa, &pa, &spec).unwrap();
            let kbb = crate::sigkernel::sig_kernel(&pb, &pb, &spec).unwrap();
            kab / (kaa * kbb).sqrt()
        };
        let (i, j) = (2, 0);
        for q in 0..6 {
            let h = 1e-5;
            let (mut a, mut b) = (params[i].clone(), params[i].clone());
            a[q] += h;
            b[q] -= h;
            let fd = (kt(&a, &params[j]) - kt(&b, &params[j])) / (2.0 * h);
            assert!((fd - c.grad[i * 3 + j][q]).abs() < 1e-7, "{fd} vs {}", c.grad[i * 3 + j][q]);
        }
        assert!((c.k[i * 3 + j] - kt(&params[i], &params[j])).abs() < 1e-14);
    }

    #[test]
    fn bandwidth_policies() {
        let s = vec![vec![0.0], vec![1.0], vec![3.0]];
        let mut cache = None;
        let pol = BandwidthPolicy::Initial { rule: BandwidthRule::Median };
        let b1 = pol.resolve(&s, &mut cache).unwrap();
        let b2 = pol.resolve(&[vec![0.0], vec![10.0]], &mut cache).unwrap();
        assert_eq!(b1.sigma, b2.sigma);
        assert!(BandwidthPolicy::Fixed { sigma: 0.0 }.resolve(&s, &mut None).is_err());
    }
}
