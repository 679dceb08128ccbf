use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Unnormalized log-density over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PriorSpec {
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    SmoothedBox { lower: Vec<f64>, upper: Vec<f64>, sigma: f64 },
    Composite { members: Vec<PriorSpec> },
}

/// `−d(x, B)² / √(2σ²)` and its gradient, with `d` the Euclidean distance
/// to the box.
pub fn box_prior_logpdf_grad(x: &[f64], lower: &[f64], upper: &[f64], sigma: f64) -> (f64, Vec<f64>) {
    let scale = (2.0 * sigma * sigma).sqrt();
    let mut d2 = 0.0;
    let grad = x
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| {
            let r = v - v.clamp(*l, *u);
            d2 += r * r;
            -2.0 * r / scale
        })
        .collect();
    (-d2 / scale, grad)
}

/// Sum that does not depend on the order of `terms`.
fn order_free_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum()
}

impl PriorSpec {
    pub fn gaussian(mean: Vec<f64>, std: Vec<f64>) -> Self {
        PriorSpec::Gaussian { mean, std }
    }

    pub fn smoothed_box(lower: Vec<f64>, upper: Vec<f64>, sigma: f64) -> Self {
        PriorSpec::SmoothedBox { lower, upper, sigma }
    }

    /// Dimension, or `None` for an empty composite.
    pub fn dim(&self) -> Option<usize> {
        match self {
            PriorSpec::Gaussian { mean, .. } => Some(mean.len()),
            PriorSpec::SmoothedBox { lower, .. } => Some(lower.len()),
            PriorSpec::Composite { members } => members.iter().find_map(PriorSpec::dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Gaussian { mean, std } => {
                if mean.len() != std.len() || std.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::invalid("gaussian prior needs positive std per coordinate"));
                }
            }
            PriorSpec::SmoothedBox { lower, upper, sigma } => {
                if lower.len() != upper.len() {
                    return Err(Error::invalid("box bounds differ in length"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(Error::invalid("box prior needs lower < upper"));
                }
                if !(*sigma > 0.0) {
                    return Err(Error::invalid("box prior sigma must be positive"));
                }
            }
            PriorSpec::Composite { members } => {
                for m in members {
                    m.validate()?;
                }
                let d = self.dim();
                if members.iter().any(|m| m.dim().is_some() && m.dim() != d) {
                    return Err(Error::invalid("composite members differ in dimension"));
                }
            }
        }
        Ok(())
    }

    /// Log-density (up to a constant) and its gradient.
    pub fn logpdf_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::invalid(format!("prior has dimension {d}, point has {}", x.len())));
            }
        }
        Ok(match self {
            PriorSpec::Gaussian { mean, std } => {
                let mut lp = 0.0;
                let g = x
                    .iter()
                    .zip(mean.iter().zip(std))
                    .map(|(v, (m, s))| {
                        let z = (v - m) / s;
                        lp -= 0.5 * z * z;
                        -(v - m) / (s * s)
                    })
                    .collect();
                (lp, g)
            }
            PriorSpec::SmoothedBox { lower, upper, sigma } => box_prior_logpdf_grad(x, lower, upper, *sigma),
            PriorSpec::Composite { members } => {
                let parts = members
                    .iter()
                    .map(|m| m.logpdf_grad(x))
                    .collect::<Result<Vec<_>>>()?;
                let mut lps: Vec<f64> = parts.iter().map(|p| p.0).collect();
                let mut col = vec![0.0; parts.len()];
                let g = (0..x.len())
                    .map(|k| {
                        for (c, p) in col.iter_mut().zip(&parts) {
                            *c = p.1[k];
                        }
                        order_free_sum(&mut col)
                    })
                    .collect();
                (order_free_sum(&mut lps), g)
            }
        })
    }
}

/// Prior plus hyper-prior: `log p̂ = log p + log h`.
pub fn compose_hyperprior(prior: PriorSpec, hyper: PriorSpec) -> Result<PriorSpec> {
    if let (Some(a), Some(b)) = (prior.dim(), hyper.dim()) {
        if a != b {
            return Err(Error::invalid("prior and hyper-prior differ in dimension"));
        }
    }
    Ok(PriorSpec::Composite { members: vec![prior, hyper] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn box_inside_and_outside() {
        let (lp, g) = box_prior_logpdf_grad(&[0.5, 0.2], &[0.0, 0.0], &[1.0, 1.0], 1.0);
        assert_eq!((lp, g), (0.0, vec![0.0, 0.0]));
        let (lp, g) = box_prior_logpdf_grad(&[2.0], &[0.0], &[1.0], 1.0);
        assert!((lp + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((g[0] + std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn box_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (lo, hi) = (vec![-1.0, 0.0, 0.5], vec![1.0, 2.0, 0.7]);
        let mut checked = 0;
        while checked < 50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let near = x.iter().zip(lo.iter().zip(&hi)).any(|(v, (l, u))| (v - l).abs() < 1e-3 || (v - u).abs() < 1e-3);
            if near {
                continue;
            }
            let (_, g) = box_prior_logpdf_grad(&x, &lo, &hi, 0.3);
            for k in 0..3 {
                let h = 1e-6;
                let (mut a, mut b) = (x.clone(), x.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (box_prior_logpdf_grad(&a, &lo, &hi, 0.3).0 - box_prior_logpdf_grad(&b, &lo, &hi, 0.3).0) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6, "{fd} vs {}", g[k]);
            }
            checked += 1;
        }
    }

    #[test]
    fn hyperprior_with_wide_box_keeps_gaussian_gradient() {
        let g = PriorSpec::gaussian(vec![0.1, -0.2], vec![0.5, 2.0]);
        let wide = PriorSpec::smoothed_box(vec![-100.0; 2], vec![100.0; 2], 1.0);
        let c = compose_hyperprior(g.clone(), wide).unwrap();
        for x in [[0.0, 0.0], [3.0, -4.0], [-1.5, 7.0]] {
            let (la, ga) = g.logpdf_grad(&x).unwrap();
            let (lb, gb) = c.logpdf_grad(&x).unwrap();
            assert!((la - lb).abs() < 1e-12);
            for (a, b) in ga.iter().zip(&gb) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composite_is_additive_and_order_free() {
        let g1 = PriorSpec::gaussian(vec![0.3], vec![0.7]);
        let g2 = PriorSpec::gaussian(vec![-1.1], vec![0.2]);
        let b = PriorSpec::smoothed_box(vec![-0.5], vec![0.5], 0.1);
        let x = [0.9];
        let c = compose_hyperprior(g1.clone(), g2.clone()).unwrap();
        let sum = g1.logpdf_grad(&x).unwrap().1[0] + g2.logpdf_grad(&x).unwrap().1[0];
        assert_eq!(c.logpdf_grad(&x).unwrap().1[0], sum);
        let orders = [
            vec![g1.clone(), g2.clone(), b.clone()],
            vec![b.clone(), g1.clone(), g2.clone()],
            vec![g2.clone(), b.clone(), g1.clone()],
        ];
        let vals: Vec<_> = orders
            .into_iter()
            .map(|members| PriorSpec::Composite { members }.logpdf_grad(&x).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn validation_errors() {
        assert!(PriorSpec::smoothed_box(vec![1.0], vec![0.0], 1.0).validate().is_err());
        assert!(PriorSpec::smoothed_box(vec![0.0], vec![1.0], 0.0).validate().is_err());
        assert!(compose_hyperprior(PriorSpec::gaussian(vec![0.0], vec![1.0]), PriorSpec::gaussian(vec![0.0; 2], vec![1.0; 2])).is_err());
        assert!(PriorSpec::gaussian(vec![0.0], vec![1.0]).logpdf_grad(&[0.0, 1.0]).is_err());
    }
}
