use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::drive::{Controller, Method};
use crate::sigkernel::BandwidthRule;
use crate::steinopt::BandwidthPolicy;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Terrain2d,
    Pointmass,
    Arm,
    Pathfollow,
    Kernelcheck,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Terrain2d, Experiment::Pointmass, Experiment::Arm, Experiment::Pathfollow, Experiment::Kernelcheck];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Terrain2d => "terrain2d",
            Experiment::Pointmass => "pointmass",
            Experiment::Arm => "arm",
            Experiment::Pathfollow => "pathfollow",
            Experiment::Kernelcheck => "kernelcheck",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment `{s}` (expected one of terrain2d, pointmass, arm, pathfollow, kernelcheck)")))
    }

    fn default_methods(self) -> Vec<String> {
        let m: &[&str] = match self {
            Experiment::Terrain2d | Experiment::Arm => &["sigsvgd", "svmp", "bgd"],
            Experiment::Pathfollow => &["sigsvgd", "svmp"],
            Experiment::Pointmass => &["sigsvgd", "svmpc", "mppi", "cmaes"],
            Experiment::Kernelcheck => &["kernelcheck"],
        };
        m.iter().map(|s| s.to_string()).collect()
    }
}

/// One experiment grid. Hyperparameters are flat so any of them can be
/// overridden with `key=value`; fields an experiment does not use are
/// carried but ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub output: String,
    /// Write per-iteration traces (planning) or per-step records (control).
    pub trace: bool,
    pub svg: bool,

    pub particles: usize,
    /// Planner iterations, or optimisation iterations per control step.
    pub iterations: usize,
    pub lr: f64,
    /// Likelihood inverse temperature λ.
    pub temperature: f64,
    pub sig_degree: usize,
    /// A number for a fixed bandwidth, or `median`/`silverman`, optionally
    /// suffixed `-initial` to freeze the value from the initial particles.
    pub sig_bandwidth: String,
    pub static_bandwidth: String,
    pub normalize: bool,
    /// Signature-distance threshold for counting modes.
    pub tau: f64,

    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    /// Free spline knots between the fixed endpoints.
    pub knots: usize,
    pub cost_points: usize,
    pub kernel_points: usize,
    pub box_sigma: f64,

    pub terrain_components: usize,
    pub terrain_sigma: f64,

    pub arm_links: Vec<f64>,
    pub obstacles: Vec<[f64; 2]>,
    pub obstacle_sigma: f64,
    pub obstacle_weight: f64,

    pub path_steps: usize,
    pub path_dim: usize,
    pub path_rho: f64,
    pub path_scale: f64,
    pub init_half_width: f64,

    pub horizon: usize,
    pub samples: usize,
    pub control_std: f64,
    pub prior_std: f64,
    pub batch: usize,
    pub mppi_lambda: f64,
    pub primitives: bool,
    /// Point-mass environment JSON; built-in geometry when absent.
    pub env: Option<String>,

    /// Random cases per kernel check.
    pub cases: usize,
}

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> RunConfig {
        let mut c = RunConfig {
            experiment,
            methods: experiment.default_methods(),
            seeds: (1..=5).collect(),
            output: "out".into(),
            trace: false,
            svg: true,
            particles: 20,
            iterations: 500,
            lr: 5e-2,
            temperature: 1.0,
            sig_degree: 4,
            sig_bandwidth: "1.5".into(),
            static_bandwidth: "1.5".into(),
            normalize: true,
            tau: 0.3,
            start: vec![0.25, 0.75],
            goal: vec![0.75, 0.25],
            knots: 2,
            cost_points: 100,
            kernel_points: 20,
            box_sigma: 0.05,
            terrain_components: 16,
            terrain_sigma: 0.1,
            arm_links: vec![0.5, 0.4, 0.3],
            obstacles: vec![[0.45, 0.55], [-0.3, 0.7]],
            obstacle_sigma: 0.1,
            obstacle_weight: 1.0,
            path_steps: 10,
            path_dim: 2,
            path_rho: 0.9,
            path_scale: 1.0,
            init_half_width: 3.0,
            horizon: 30,
            samples: 10,
            control_std: 5.0,
            prior_std: 1.0,
            batch: 300,
            mppi_lambda: 1.0,
            primitives: true,
            env: None,
            cases: 20,
        };
        match experiment {
            Experiment::Terrain2d | Experiment::Kernelcheck => {}
            Experiment::Pointmass => {
                c.particles = 30;
                c.iterations = 3;
                c.lr = 1.0;
                c.sig_degree = 3;
                c.sig_bandwidth = "5.65".into();
                c.static_bandwidth = "silverman".into();
                c.kernel_points = 10;
                c.start = vec![-1.8, -1.8];
                c.goal = vec![1.8, 1.8];
            }
            Experiment::Arm => {
                c.lr = 1e-3;
                c.sig_degree = 6;
                c.knots = 3;
                c.start = vec![0.0, 0.0, 0.0];
                c.goal = vec![1.5, 0.5, -0.5];
            }
            Experiment::Pathfollow => {
                c.iterations = 200;
                c.sig_bandwidth = "silverman-initial".into();
                c.static_bandwidth = "silverman".into();
                c.sig_degree = 4;
            }
        }
        c
    }

    /// Layer a JSON object, which must name its experiment, on top of that
    /// experiment's defaults.
    pub fn from_value(v: Value) -> Result<RunConfig> {
        let obj = match v {
            Value::Object(m) => m,
            _ => return Err(Error::Parse("config must be a JSON object".into())),
        };
        let exp = match obj.get("experiment") {
            Some(Value::String(s)) => Experiment::parse(s)?,
            Some(_) => return Err(Error::Parse("`experiment` must be a string".into())),
            None => return Err(Error::invalid("config does not name an experiment")),
        };
        let mut cfg = RunConfig::defaults(exp);
        for (k, v) in obj {
            cfg.set_value(&k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a JSON config file's text; errors carry line and column.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config line {} column {}: {e}", e.line(), e.column())))?;
        RunConfig::from_value(v)
    }

    fn set_value(&mut self, key: &str, v: Value) -> Result<()> {
        let mut cur = serde_json::to_value(&*self)?;
        let slot = cur
            .get_mut(key)
            .ok_or_else(|| Error::invalid(format!("unknown config key `{key}`")))?;
        *slot = v;
        *self = serde_json::from_value(cur).map_err(|e| Error::invalid(format!("bad value for `{key}`: {e}")))?;
        Ok(())
    }

    /// Apply one `key=value` override. Values are read as JSON when they
    /// parse, otherwise as strings; `seeds` takes `a..b` and `methods` a
    /// comma list.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, raw) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override `{kv}` is not key=value")))?;
        let (k, raw) = (k.trim(), raw.trim());
        let v = match k {
            "seeds" if !raw.starts_with('[') => serde_json::to_value(parse_seeds(raw)?)?,
            "methods" if !raw.starts_with('[') => Value::from(raw.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>()),
            "experiment" => return Err(Error::invalid("the experiment cannot be overridden")),
            _ => serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())),
        };
        self.set_value(k, v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("no seeds"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods"));
        }
        for m in &self.methods {
            let ok = match self.experiment {
                Experiment::Pointmass => Controller::parse(m).is_ok(),
                Experiment::Kernelcheck => m == "kernelcheck",
                _ => Method::parse(m).is_ok(),
            };
            if !ok {
                return Err(Error::invalid(format!("method `{m}` does not apply to {}", self.experiment.name())));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(m) = self.methods.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::invalid(format!("method `{m}` listed twice")));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::invalid(format!("seed {s} listed twice")));
        }
        parse_bandwidth(&self.sig_bandwidth)?;
        parse_bandwidth(&self.static_bandwidth)?;
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.particles == 0 || self.cases == 0 {
            return Err(Error::invalid("particles and cases must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.clear();
        let text = serde_json::to_string(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn seeds_label(&self) -> String {
        let s = &self.seeds;
        let contiguous = s.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous {
            format!("{}..{}", s[0], s[s.len() - 1])
        } else {
            s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        }
    }
}

/// `a..b` (inclusive), a single seed, or a comma list of either.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::invalid(format!("bad seed list `{s}`; expected e.g. 1..5"));
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

pub fn parse_bandwidth(s: &str) -> Result<BandwidthPolicy> {
    let (rule, initial) = match s.strip_suffix("-initial") {
        Some(r) => (r, true),
        None => (s, false),
    };
    let rule = match rule {
        "median" => BandwidthRule::Median,
        "silverman" => BandwidthRule::Silverman,
        _ => {
            let sigma: f64 = s
                .parse()
                .map_err(|_| Error::invalid(format!("bandwidth `{s}` is not a number, median or silverman")))?;
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid("fixed bandwidth must be positive"));
            }
            return Ok(BandwidthPolicy::Fixed { sigma });
        }
    };
    Ok(if initial { BandwidthPolicy::Initial { rule } } else { BandwidthPolicy::PerStep { rule } })
}
