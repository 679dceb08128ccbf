use std::io::Write;

use serde::{Deserialize, Serialize};

use super::halton_2d;
use crate::sigcore::Path;
use crate::{Error, Result};

/// Weight of the piecewise-linear length term.
pub const LENGTH_WEIGHT: f64 = 75.0;

/// Isotropic Gaussian mixture on the unit box with uniform weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainField {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
    pub seed: u64,
}

impl TerrainField {
    /// `n_g` centers from the Halton sequence starting at index
    /// `1 + seed · n_g`, so distinct seeds give disjoint point sets.
    pub fn halton(n_g: usize, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("terrain sigma must be positive"));
        }
        Ok(TerrainField {
            centers: halton_2d(1 + seed * n_g as u64, n_g),
            sigma,
            seed,
        })
    }

    pub fn empty() -> Self {
        TerrainField { centers: Vec::new(), sigma: 1.0, seed: 0 }
    }

    /// Mixture density and its gradient at `x`.
    pub fn density_grad(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        if self.centers.is_empty() {
            return (0.0, [0.0, 0.0]);
        }
        let s2 = self.sigma * self.sigma;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * s2 * self.centers.len() as f64);
        let (mut p, mut g) = (0.0, [0.0, 0.0]);
        for c in &self.centers {
            let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
            let v = norm * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
            p += v;
            g[0] -= v * dx / s2;
            g[1] -= v * dy / s2;
        }
        (p, g)
    }

    pub fn density(&self, x: [f64; 2]) -> f64 {
        self.density_grad(x).0
    }

    /// Density on an `n × n` grid over the unit box as CSV `x,y,density`.
    pub fn write_grid_csv<W: Write>(&self, n: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "density"])?;
        for i in 0..n {
            for j in 0..n {
                let x = i as f64 / (n.max(2) - 1) as f64;
                let y = j as f64 / (n.max(2) - 1) as f64;
                w.write_record([
                    crate::sigcore::io_format(x),
                    crate::sigcore::io_format(y),
                    crate::sigcore::io_format(self.density([x, y])),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σ_t p(x_t) + 75 Σ_t ‖x_t − x_{t−1}‖` with its per-vertex gradient.
pub fn terrain_cost(field: &TerrainField, path: &Path) -> Result<(f64, Vec<f64>)> {
    if path.dim() != 2 {
        return Err(Error::invalid(format!("terrain cost needs a 2D path, got {}D", path.dim())));
    }
    let s = path.len();
    let mut cost = 0.0;
    let mut grad = vec![0.0; 2 * s];
    for i in 0..s {
        let v = path.vertex(i);
        let (p, g) = field.density_grad([v[0], v[1]]);
        cost += p;
        grad[2 * i] += g[0];
        grad[2 * i + 1] += g[1];
        if i > 0 {
            let u = path.vertex(i - 1);
            let (dx, dy) = (v[0] - u[0], v[1] - u[1]);
            let len = (dx * dx + dy * dy).sqrt();
            cost += LENGTH_WEIGHT * len;
            if len > 0.0 {
                let (nx, ny) = (LENGTH_WEIGHT * dx / len, LENGTH_WEIGHT * dy / len);
                grad[2 * i] += nx;
                grad[2 * i + 1] += ny;
                grad[2 * (i - 1)] -= nx;
                grad[2 * (i - 1) + 1] -= ny;
            }
        }
    }
    Ok((cost, grad))
}
