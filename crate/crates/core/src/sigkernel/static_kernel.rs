use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticKind {
    SquaredExponential,
    Linear,
}

/// A kernel on points of `R^c`. The bandwidth is ignored by the linear kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticKernelSpec {
    pub kind: StaticKind,
    pub bandwidth: f64,
}

impl StaticKernelSpec {
    pub fn squared_exponential(bandwidth: f64) -> Self {
        StaticKernelSpec {
            kind: StaticKind::SquaredExponential,
            bandwidth,
        }
    }

    pub fn linear() -> Self {
        StaticKernelSpec {
            kind: StaticKind::Linear,
            bandwidth: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == StaticKind::SquaredExponential
            && !(self.bandwidth > 0.0 && self.bandwidth.is_finite())
        {
            return Err(Error::invalid(format!(
                "squared-exponential bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            StaticKind::SquaredExponential => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
            }
            StaticKind::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }

    /// Accumulates `scale * ∂k(x, y)/∂y` into `out`, given `kxy = k(x, y)`.
    #[inline]
    pub(crate) fn add_grad_second(&self, x: &[f64], y: &[f64], kxy: f64, scale: f64, out: &mut [f64]) {
        match self.kind {
            StaticKind::SquaredExponential => {
                let f = scale * kxy / (self.bandwidth * self.bandwidth);
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o += f * (a - b);
                }
            }
            StaticKind::Linear => {
                for (o, a) in out.iter_mut().zip(x) {
                    *o += scale * a;
                }
            }
        }
    }
}

/// Evaluates the static kernel: `exp(-|x-y|^2 / (2σ^2))` or `<x, y>`.
pub fn static_eval(spec: &StaticKernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "point dimensions differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    spec.validate()?;
    Ok(spec.eval_unchecked(x, y))
}
