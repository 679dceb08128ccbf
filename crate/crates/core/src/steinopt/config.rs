use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Multiplier schedule applied to the repulsive term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Anneal {
    None,
    Cosine { min_mult: f64 },
}

/// `min + (1 - min)(1 + cos(π iter / total)) / 2` for cosine, 1 otherwise.
pub fn anneal(iter: usize, total: usize, kind: Anneal) -> f64 {
    match kind {
        Anneal::None => 1.0,
        Anneal::Cosine { min_mult } => {
            if total == 0 {
                return 1.0;
            }
            let c = (std::f64::consts::PI * iter as f64 / total as f64).cos();
            min_mult + (1.0 - min_mult) * (1.0 + c) / 2.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Likelihood temperature λ in `exp(-λ C)`.
    pub temperature: f64,
    /// Monte Carlo samples per particle; 0 selects analytic gradients.
    pub mc_samples: usize,
    pub mc_noise: f64,
    /// Inverse temperature α inside the log-mean-exp objective.
    pub mc_alpha: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub anneal: Anneal,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            temperature: 1.0,
            mc_samples: 0,
            mc_noise: 1.0,
            mc_alpha: 1.0,
            step_size: 0.05,
            iterations: 100,
            anneal: Anneal::None,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.temperature) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if !pos(self.step_size) {
            return Err(Error::invalid("step size must be positive"));
        }
        if self.mc_samples == 1 {
            return Err(Error::invalid("Monte Carlo gradients need at least 2 samples"));
        }
        if self.mc_samples > 0 && !(pos(self.mc_noise) && pos(self.mc_alpha)) {
            return Err(Error::invalid("Monte Carlo noise and alpha must be positive"));
        }
        if let Anneal::Cosine { min_mult } = self.anneal {
            if !(0.0..=1.0).contains(&min_mult) {
                return Err(Error::invalid("anneal min_mult must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints() {
        let c = Anneal::Cosine { min_mult: 0.0 };
        assert_eq!(anneal(0, 100, c), 1.0);
        assert!((anneal(50, 100, c) - 0.5).abs() < 1e-15);
        assert!(anneal(99, 100, c) <= 1e-3);
        assert_eq!(anneal(42, 100, Anneal::None), 1.0);
        let m = Anneal::Cosine { min_mult: 0.2 };
        assert!((anneal(50, 100, m) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(InferenceConfig::default().validate().is_ok());
        let mut c = InferenceConfig::default();
        c.temperature = 0.0;
        assert!(c.validate().is_err());
        let mut c = InferenceConfig::default();
        c.mc_samples = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let c = InferenceConfig {
            anneal: Anneal::Cosine { min_mult: 0.1 },
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<InferenceConfig>(&s).unwrap(), c);
    }
}
