use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// `σ² = median(|x_i - x_j|²) / (2 log(n + 1))`
    Median,
    /// `σ = (4 / (n (p + 2)))^{1/(p+4)} · mean per-coordinate std`
    Silverman,
}

/// A bandwidth and whether it came from the degenerate fallback.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bandwidth {
    pub sigma: f64,
    pub degenerate: bool,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Bandwidth from a set of flattened particles. Identical particles fall
/// back to `σ = 1` with `degenerate` set.
pub fn bandwidth_heuristic(particles: &[Vec<f64>], rule: BandwidthRule) -> Result<Bandwidth> {
    let n = particles.len();
    if n < 2 {
        return Err(Error::invalid("bandwidth heuristic needs at least 2 particles"));
    }
    let p = particles[0].len();
    if particles.iter().any(|x| x.len() != p) {
        return Err(Error::invalid("particles have different lengths"));
    }
    let fallback = Bandwidth { sigma: 1.0, degenerate: true };
    let sigma = match rule {
        BandwidthRule::Median => {
            let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    d2.push(
                        particles[i]
                            .iter()
                            .zip(&particles[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>(),
                    );
                }
            }
            if d2.iter().all(|v| *v == 0.0) {
                log::warn!("all particles coincide; bandwidth falls back to 1");
                return Ok(fallback);
            }
            (median(&mut d2) / (2.0 * ((n + 1) as f64).ln())).sqrt()
        }
        BandwidthRule::Silverman => {
            let nf = n as f64;
            let mut std_sum = 0.0;
            for k in 0..p {
                let mean = particles.iter().map(|x| x[k]).sum::<f64>() / nf;
                let var = particles.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
                std_sum += var.sqrt();
            }
            let std = std_sum / p as f64;
            if std == 0.0 {
                log::warn!("all particles coincide; bandwidth falls back to 1");
                return Ok(fallback);
            }
            let pf = p as f64;
            (4.0 / (nf * (pf + 2.0))).powf(1.0 / (pf + 4.0)) * std
        }
    };
    if sigma > 0.0 && sigma.is_finite() {
        Ok(Bandwidth { sigma, degenerate: false })
    } else {
        log::warn!("bandwidth heuristic produced {sigma}; falling back to 1");
        Ok(fallback)
    }
}
