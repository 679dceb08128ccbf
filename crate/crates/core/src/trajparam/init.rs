use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SplineTrajectory;
use crate::{Error, Result};

/// Start, goal and the axis-aligned box the knots may occupy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PlanRequest {
    pub fn validate(&self) -> Result<()> {
        let c = self.start.len();
        if c == 0 || self.goal.len() != c || self.lower.len() != c || self.upper.len() != c {
            return Err(Error::invalid("request vectors must share a positive dimension"));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("empty bounds: lower must be < upper"));
        }
        let inside = |x: &[f64]| {
            x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
        };
        if !inside(&self.start) || !inside(&self.goal) {
            return Err(Error::invalid("bounds must contain start and goal"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitStrategy {
    UniformRandom,
    PerturbedLine { noise: f64 },
}

/// Initial knots for one particle, endpoints fixed to the request.
pub fn init_knots<R: Rng + ?Sized>(
    request: &PlanRequest,
    n_intermediate: usize,
    strategy: InitStrategy,
    rng: &mut R,
) -> Result<SplineTrajectory> {
    request.validate()?;
    let c = request.start.len();
    let mut free = Vec::with_capacity(n_intermediate * c);
    for k in 1..=n_intermediate {
        let s = k as f64 / (n_intermediate + 1) as f64;
        for d in 0..c {
            let (lo, hi) = (request.lower[d], request.upper[d]);
            let v = match strategy {
                InitStrategy::UniformRandom => rng.gen_range(lo..hi),
                InitStrategy::PerturbedLine { noise } => {
                    let line = request.start[d] + s * (request.goal[d] - request.start[d]);
                    if noise > 0.0 {
                        let n = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
                        (line + n.sample(rng)).clamp(lo, hi)
                    } else {
                        line
                    }
                }
            };
            free.push(v);
        }
    }
    SplineTrajectory::from_free(&request.start, &request.goal, &free)
}
