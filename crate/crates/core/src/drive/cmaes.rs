use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Covariance matrix adaptation state with default recombination weights
/// and learning rates.
#[derive(Clone, Debug)]
pub struct CmaState {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: Vec<f64>,
    pub p_c: Vec<f64>,
    pub population: usize,
    pub generation: usize,
    pub best: Option<(Vec<f64>, f64)>,
    // eigendecomposition of cov: B and D (standard deviations)
    b: DMatrix<f64>,
    d: Vec<f64>,
}

struct Params {
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl CmaState {
    pub fn new(mean: Vec<f64>, sigma: f64, population: usize) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::invalid("CMA-ES needs a non-empty mean"));
        }
        if population < 2 {
            return Err(Error::invalid("CMA-ES population must be at least 2"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("CMA-ES step size must be non-negative, got {sigma}")));
        }
        Ok(CmaState {
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            p_sigma: vec![0.0; n],
            p_c: vec![0.0; n],
            population,
            generation: 0,
            best: None,
            b: DMatrix::identity(n, n),
            d: vec![1.0; n],
        })
    }

    /// Default population size `4 + ⌊3 ln n⌋`.
    pub fn default_population(n: usize) -> usize {
        4 + (3.0 * (n as f64).ln()).floor() as usize
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn params(&self) -> Params {
        let n = self.dim() as f64;
        let mu = self.population / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| ((self.population as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
            .collect();
        let s: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / s).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Params { mu, weights, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n }
    }

    /// Draws `population` candidates from `N(mean, σ² C)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..self.population)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let scaled = DVector::from_fn(n, |i, _| self.d[i] * z[i]);
                let y = &self.b * scaled;
                (0..n).map(|i| self.mean[i] + self.sigma * y[i]).collect()
            })
            .collect()
    }

    fn refresh_eigen(&mut self) {
        let n = self.dim();
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let mut vals = eig.eigenvalues.clone();
        let mut repaired = false;
        for v in vals.iter_mut() {
            if !(*v >= 1e-12) {
                *v = 1e-12;
                repaired = true;
            }
        }
        if repaired {
            log::warn!("covariance lost positive definiteness; eigenvalues floored at 1e-12");
            let diag = DMatrix::from_diagonal(&vals);
            self.cov = &eig.eigenvectors * diag * eig.eigenvectors.transpose();
        } else {
            self.cov = sym;
        }
        self.b = eig.eigenvectors;
        self.d = (0..n).map(|i| vals[i].sqrt()).collect();
    }

    /// `C^{-1/2} v`
    fn inv_sqrt_times(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        let t = self.b.transpose() * v;
        let t = DVector::from_fn(t.len(), |i, _| t[i] / self.d[i]);
        (&self.b * t).iter().copied().collect()
    }
}

/// One generation. `candidates` are the sampled points (plus any injected
/// ones such as motion primitives) and `fitness` their costs; all of them
/// take part in selection. Lower fitness is better.
pub fn cmaes_step(state: &mut CmaState, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
    let n = state.dim();
    if candidates.len() != fitness.len() {
        return Err(Error::invalid("one fitness value per candidate is required"));
    }
    if candidates.len() < 2 {
        return Err(Error::invalid("CMA-ES needs at least 2 candidates"));
    }
    if candidates.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("candidate length does not match the mean"));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    let top = order[0];
    if state.best.as_ref().map_or(true, |(_, f)| fitness[top] < *f) {
        state.best = Some((candidates[top].clone(), fitness[top]));
    }
    if fitness.iter().all(|f| *f == fitness[0]) || state.sigma == 0.0 {
        // neutral selection or a collapsed distribution carries no information
        state.generation += 1;
        return Ok(());
    }

    let p = state.params();
    let mu = p.mu.min(candidates.len());
    let w: Vec<f64> = {
        let s: f64 = p.weights[..mu].iter().sum();
        p.weights[..mu].iter().map(|v| v / s).collect()
    };
    let old = state.mean.clone();
    let ys: Vec<Vec<f64>> = order[..mu]
        .iter()
        .map(|&k| (0..n).map(|i| (candidates[k][i] - old[i]) / state.sigma).collect())
        .collect();
    let mut y_w = vec![0.0; n];
    for (wk, y) in w.iter().zip(&ys) {
        for i in 0..n {
            y_w[i] += wk * y[i];
        }
    }
    for i in 0..n {
        state.mean[i] = old[i] + state.sigma * y_w[i];
    }

    let cs = p.c_sigma;
    let z = state.inv_sqrt_times(&y_w);
    let f = (cs * (2.0 - cs) * p.mu_eff).sqrt();
    for i in 0..n {
        state.p_sigma[i] = (1.0 - cs) * state.p_sigma[i] + f * z[i];
    }
    let ps_norm = state.p_sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
    let g = (state.generation + 1) as f64;
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * g)).sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
    let hs = if h_sigma { 1.0 } else { 0.0 };
    let fc = (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt();
    for i in 0..n {
        state.p_c[i] = (1.0 - p.c_c) * state.p_c[i] + hs * fc * y_w[i];
    }

    let delta = (1.0 - hs) * p.c_c * (2.0 - p.c_c);
    let pc = DVector::from_column_slice(&state.p_c);
    let mut rank_mu = DMatrix::zeros(n, n);
    for (wk, y) in w.iter().zip(&ys) {
        let y = DVector::from_column_slice(y);
        rank_mu += *wk * &y * y.transpose();
    }
    state.cov = (1.0 + p.c_1 * delta - p.c_1 - p.c_mu) * &state.cov
        + p.c_1 * &pc * pc.transpose()
        + p.c_mu * rank_mu;
    state.sigma *= ((cs / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
    if !state.sigma.is_finite() || state.mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("CMA-ES diverged at generation {}", state.generation)));
    }
    state.refresh_eigen();
    state.generation += 1;
    Ok(())
}
