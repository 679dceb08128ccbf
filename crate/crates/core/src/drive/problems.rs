use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::sigcore::Path;
use crate::steinopt::{Decoder, PriorSpec, SequenceDecoder};
use crate::trajparam::{init_knots, InitStrategy, PlanRequest, SplineDecoder};
use crate::worlds::{arm_path_cost, terrain_cost, PlanarArm, TerrainField};
use crate::{Error, Result};

/// A cost functional over flat parameter vectors.
pub trait Problem: Send + Sync {
    fn param_len(&self) -> usize;
    fn sample_init(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn cost(&self, params: &[f64]) -> Result<f64>;
    fn cost_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn prior(&self) -> Option<&PriorSpec>;
    /// Path view compared by signature kernels.
    fn kernel_decoder(&self) -> Arc<dyn Decoder>;
    /// Dense path used for reporting and plots.
    fn output_path(&self, params: &[f64]) -> Path;

    /// Unnormalized log posterior `−λ C + log p`.
    fn log_posterior(&self, params: &[f64], temperature: f64) -> Result<f64> {
        let lp = match self.prior() {
            Some(p) => p.logpdf_grad(params)?.0,
            None => 0.0,
        };
        Ok(-temperature * self.cost(params)? + lp)
    }
}

/// `C(x) = ½ Σ_k a_k (x_k − x*_k)²`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    pub optimum: Vec<f64>,
    pub curvature: Vec<f64>,
    pub init_range: (f64, f64),
    decoder: Arc<dyn Decoder>,
}

impl QuadraticProblem {
    /// Parameters are read as a sequence of `dim`-vectors for the kernel view.
    pub fn new(optimum: Vec<f64>, curvature: Vec<f64>, dim: usize) -> Result<Self> {
        if optimum.len() != curvature.len() || optimum.is_empty() || optimum.len() % dim != 0 {
            return Err(Error::invalid("quadratic problem shape mismatch"));
        }
        if curvature.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::invalid("curvatures must be positive"));
        }
        let steps = optimum.len() / dim;
        let decoder: Arc<dyn Decoder> = Arc::new(SequenceDecoder::anchored(dim, steps, vec![0.0; dim])?);
        Ok(QuadraticProblem { optimum, curvature, init_range: (-1.0, 1.0), decoder })
    }
}

impl Problem for QuadraticProblem {
    fn param_len(&self) -> usize {
        self.optimum.len()
    }

    fn sample_init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.param_len()).map(|_| rng.gen_range(self.init_range.0..self.init_range.1)).collect()
    }

    fn cost(&self, x: &[f64]) -> Result<f64> {
        Ok(self.cost_grad(x)?.0)
    }

    fn cost_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut c = 0.0;
        let g = x
            .iter()
            .zip(self.optimum.iter().zip(&self.curvature))
            .map(|(v, (o, a))| {
                c += 0.5 * a * (v - o) * (v - o);
                a * (v - o)
            })
            .collect();
        Ok((c, g))
    }

    fn prior(&self) -> Option<&PriorSpec> {
        None
    }

    fn kernel_decoder(&self) -> Arc<dyn Decoder> {
        self.decoder.clone()
    }

    fn output_path(&self, params: &[f64]) -> Path {
        self.decoder.decode(params)
    }
}

/// Spline paths across a Gaussian-mixture terrain.
#[derive(Debug, Clone)]
pub struct TerrainProblem {
    pub field: TerrainField,
    pub request: PlanRequest,
    cost_decoder: SplineDecoder,
    kernel_decoder: Arc<SplineDecoder>,
    prior: PriorSpec,
}

impl TerrainProblem {
    pub fn new(
        field: TerrainField,
        request: PlanRequest,
        n_free: usize,
        cost_points: usize,
        kernel_points: usize,
        box_sigma: f64,
    ) -> Result<Self> {
        request.validate()?;
        if request.start.len() != 2 {
            return Err(Error::invalid("terrain planning is two-dimensional"));
        }
        let cost_decoder = SplineDecoder::new(request.start.clone(), request.goal.clone(), n_free, cost_points)?;
        let kernel_decoder = Arc::new(cost_decoder.with_points(kernel_points)?);
        let lower: Vec<f64> = request.lower.iter().cycle().take(2 * n_free).copied().collect();
        let upper: Vec<f64> = request.upper.iter().cycle().take(2 * n_free).copied().collect();
        let prior = PriorSpec::smoothed_box(lower, upper, box_sigma);
        prior.validate()?;
        Ok(TerrainProblem { field, request, cost_decoder, kernel_decoder, prior })
    }

    pub fn cost_decoder(&self) -> &SplineDecoder {
        &self.cost_decoder
    }
}

impl Problem for TerrainProblem {
    fn param_len(&self) -> usize {
        self.cost_decoder.param_len()
    }

    fn sample_init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n_free = self.param_len() / 2;
        init_knots(&self.request, n_free, InitStrategy::UniformRandom, rng)
            .expect("request validated at construction")
            .free_params()
    }

    fn cost(&self, x: &[f64]) -> Result<f64> {
        Ok(terrain_cost(&self.field, &self.cost_decoder.decode(x))?.0)
    }

    fn cost_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (c, g) = terrain_cost(&self.field, &self.cost_decoder.decode(x))?;
        Ok((c, self.cost_decoder.pullback(x, &g)))
    }

    fn prior(&self) -> Option<&PriorSpec> {
        Some(&self.prior)
    }

    fn kernel_decoder(&self) -> Arc<dyn Decoder> {
        self.kernel_decoder.clone()
    }

    fn output_path(&self, x: &[f64]) -> Path {
        self.cost_decoder.decode(x)
    }
}

/// Joint-space spline for a planar arm.
#[derive(Debug, Clone)]
pub struct ArmProblem {
    pub arm: PlanarArm,
    cost_decoder: SplineDecoder,
    kernel_decoder: Arc<SplineDecoder>,
    prior: PriorSpec,
}

impl ArmProblem {
    pub fn new(arm: PlanarArm, start: Vec<f64>, goal: Vec<f64>, n_free: usize, cost_points: usize, kernel_points: usize) -> Result<Self> {
        if start.len() != arm.dof() || goal.len() != arm.dof() {
            return Err(Error::invalid("start and goal must match the arm's joint count"));
        }
        let cost_decoder = SplineDecoder::new(start, goal, n_free, cost_points)?;
        let kernel_decoder = Arc::new(cost_decoder.with_points(kernel_points)?);
        let lower = arm.lower.iter().cycle().take(n_free * arm.dof()).copied().collect();
        let upper = arm.upper.iter().cycle().take(n_free * arm.dof()).copied().collect();
        let prior = PriorSpec::smoothed_box(lower, upper, 0.1);
        prior.validate()?;
        Ok(ArmProblem { arm, cost_decoder, kernel_decoder, prior })
    }
}

impl Problem for ArmProblem {
    fn param_len(&self) -> usize {
        self.cost_decoder.param_len()
    }

    fn sample_init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.arm.dof();
        (0..self.param_len())
            .map(|k| rng.gen_range(self.arm.lower[k % n]..self.arm.upper[k % n]))
            .collect()
    }

    fn cost(&self, x: &[f64]) -> Result<f64> {
        Ok(arm_path_cost(&self.arm, &self.cost_decoder.decode(x))?.0.total)
    }

    fn cost_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (c, g) = arm_path_cost(&self.arm, &self.cost_decoder.decode(x))?;
        Ok((c.total, self.cost_decoder.pullback(x, &g)))
    }

    fn prior(&self) -> Option<&PriorSpec> {
        Some(&self.prior)
    }

    fn kernel_decoder(&self) -> Arc<dyn Decoder> {
        self.kernel_decoder.clone()
    }

    fn output_path(&self, x: &[f64]) -> Path {
        self.cost_decoder.decode(x)
    }
}

/// Tracking a path through a correlated Gaussian over `steps` time steps:
/// each coordinate sequence has covariance `s² ρ^{|i−j|}` and the cost is
/// its negative log density (up to a constant).
#[derive(Debug, Clone)]
pub struct PathFollowProblem {
    pub steps: usize,
    pub dim: usize,
    pub rho: f64,
    pub scale: f64,
    pub init_half_width: f64,
    decoder: Arc<SequenceDecoder>,
}

impl PathFollowProblem {
    pub fn new(steps: usize, dim: usize, rho: f64, scale: f64, init_half_width: f64) -> Result<Self> {
        if steps < 2 || !(0.0..1.0).contains(&rho) || !(scale > 0.0) {
            return Err(Error::invalid("path following needs >= 2 steps, rho in [0, 1) and positive scale"));
        }
        Ok(PathFollowProblem {
            steps,
            dim,
            rho,
            scale,
            init_half_width,
            decoder: Arc::new(SequenceDecoder::new(dim, steps)?),
        })
    }

    /// Normalized target log density; the cost is its negation up to the
    /// Gaussian normalizing constant.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let n = self.steps as f64;
        let log_det = 2.0 * n * self.scale.ln() + (n - 1.0) * (1.0 - self.rho * self.rho).ln();
        let log_z = 0.5 * n * (2.0 * std::f64::consts::PI).ln() + 0.5 * log_det;
        Ok(-self.cost(x)? - self.dim as f64 * log_z)
    }

    /// `Σ⁻¹ v` for the AR(1) covariance (tridiagonal precision).
    fn precision_times(&self, v: &[f64]) -> Vec<f64> {
        let (r, n) = (self.rho, v.len());
        let c = 1.0 / (self.scale * self.scale * (1.0 - r * r));
        (0..n)
            .map(|i| {
                let diag = if i == 0 || i == n - 1 { 1.0 } else { 1.0 + r * r };
                let mut o = diag * v[i];
                if i > 0 {
                    o -= r * v[i - 1];
                }
                if i + 1 < n {
                    o -= r * v[i + 1];
                }
                c * o
            })
            .collect()
    }
}

impl Problem for PathFollowProblem {
    fn param_len(&self) -> usize {
        self.steps * self.dim
    }

    fn sample_init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let w = self.init_half_width;
        (0..self.param_len()).map(|_| rng.gen_range(-w..w)).collect()
    }

    fn cost(&self, x: &[f64]) -> Result<f64> {
        Ok(self.cost_grad(x)?.0)
    }

    fn cost_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; x.len()];
        let mut c = 0.0;
        for k in 0..self.dim {
            let seq: Vec<f64> = (0..self.steps).map(|t| x[t * self.dim + k]).collect();
            let pv = self.precision_times(&seq);
            for t in 0..self.steps {
                c += 0.5 * seq[t] * pv[t];
                g[t * self.dim + k] = pv[t];
            }
        }
        Ok((c, g))
    }

    fn prior(&self) -> Option<&PriorSpec> {
        None
    }

    fn kernel_decoder(&self) -> Arc<dyn Decoder> {
        self.decoder.clone()
    }

    fn output_path(&self, x: &[f64]) -> Path {
        self.decoder.decode(x)
    }
}
