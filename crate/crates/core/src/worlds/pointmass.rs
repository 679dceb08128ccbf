use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Double-integrator world with circular obstacles and box walls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassConfig {
    pub mass: f64,
    pub dt: f64,
    pub v_max: f64,
    /// Per-axis force limit.
    pub u_max: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub obstacles: Vec<Circle>,
    /// Walls at `±wall` on both axes.
    pub wall: f64,
    pub penalty: f64,
    pub max_steps: usize,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        PointMassConfig {
            mass: 2.0,
            dt: 0.02,
            v_max: 5.0,
            u_max: 10.0,
            start: [-1.8, -1.8],
            goal: [1.8, 1.8],
            goal_radius: 0.1,
            obstacles: PointMassConfig::grid(4, 2.0, 0.25),
            wall: 2.5,
            penalty: 1e6,
            max_steps: 1000,
        }
    }
}

impl PointMassConfig {
    /// `n × n` circles of radius `r` at cell centers of `[-half, half]²`.
    pub fn grid(n: usize, half: f64, r: f64) -> Vec<Circle> {
        let step = 2.0 * half / n as f64;
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                v.push(Circle {
                    center: [-half + step * (i as f64 + 0.5), -half + step * (j as f64 + 0.5)],
                    radius: r,
                });
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.mass) && pos(self.dt) && pos(self.v_max) && pos(self.u_max) && pos(self.wall)) {
            return Err(Error::invalid("mass, dt, v_max, u_max and wall must be positive"));
        }
        if self.goal_radius < 0.0 || self.penalty < 0.0 {
            return Err(Error::invalid("goal radius and penalty must be non-negative"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: PointMassConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn collides(&self, x: [f64; 2]) -> bool {
        if x[0].abs() >= self.wall || x[1].abs() >= self.wall {
            return true;
        }
        self.obstacles.iter().any(|c| {
            let (dx, dy) = (x[0] - c.center[0], x[1] - c.center[1]);
            dx * dx + dy * dy < c.radius * c.radius
        })
    }
}

/// Running cost `0.5 eᵀe + 0.25 ẋᵀẋ + 0.2 uᵀu + 1{col} p`.
pub fn pointmass_cost(pos: [f64; 2], vel: [f64; 2], u: [f64; 2], goal: [f64; 2], collided: bool, penalty: f64) -> f64 {
    let e = [pos[0] - goal[0], pos[1] - goal[1]];
    let mut c = 0.5 * (e[0] * e[0] + e[1] * e[1]) + 0.25 * (vel[0] * vel[0] + vel[1] * vel[1]) + 0.2 * (u[0] * u[0] + u[1] * u[1]);
    if collided {
        c += penalty;
    }
    c
}

/// Terminal cost `1000 eᵀe + 0.1 ẋᵀẋ`.
pub fn pointmass_terminal_cost(pos: [f64; 2], vel: [f64; 2], goal: [f64; 2]) -> f64 {
    let e = [pos[0] - goal[0], pos[1] - goal[1]];
    1000.0 * (e[0] * e[0] + e[1] * e[1]) + 0.1 * (vel[0] * vel[0] + vel[1] * vel[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub action: [f64; 2],
    pub cost: f64,
    pub collided: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointMassEnv {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub crashed: bool,
}

impl PointMassEnv {
    pub fn new(cfg: &PointMassConfig) -> Self {
        PointMassEnv { pos: cfg.start, vel: [0.0, 0.0], crashed: false }
    }

    /// Semi-implicit Euler step. Returns whether this step collided; a
    /// crashed particle never moves again.
    pub fn step(&mut self, cfg: &PointMassConfig, u: [f64; 2]) -> bool {
        if self.crashed {
            self.vel = [0.0, 0.0];
            return false;
        }
        let u = [u[0].clamp(-cfg.u_max, cfg.u_max), u[1].clamp(-cfg.u_max, cfg.u_max)];
        let mut v = [self.vel[0] + cfg.dt * u[0] / cfg.mass, self.vel[1] + cfg.dt * u[1] / cfg.mass];
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if speed > cfg.v_max {
            v = [v[0] * cfg.v_max / speed, v[1] * cfg.v_max / speed];
        }
        let x = [self.pos[0] + cfg.dt * v[0], self.pos[1] + cfg.dt * v[1]];
        if cfg.collides(x) {
            self.vel = [0.0, 0.0];
            self.crashed = true;
            return true;
        }
        self.pos = x;
        self.vel = v;
        false
    }

    pub fn at_goal(&self, cfg: &PointMassConfig) -> bool {
        let e = [self.pos[0] - cfg.goal[0], self.pos[1] - cfg.goal[1]];
        (e[0] * e[0] + e[1] * e[1]).sqrt() <= cfg.goal_radius
    }

    /// Applies `controls` (row-major pairs) and returns the accumulated
    /// running cost plus the terminal cost. Once crashed the penalty is
    /// charged on every remaining step.
    pub fn rollout_cost(&self, cfg: &PointMassConfig, controls: &[f64]) -> f64 {
        let mut env = self.clone();
        let mut total = 0.0;
        for u in controls.chunks(2) {
            let u = [u[0].clamp(-cfg.u_max, cfg.u_max), u[1].clamp(-cfg.u_max, cfg.u_max)];
            env.step(cfg, u);
            total += pointmass_cost(env.pos, env.vel, u, cfg.goal, env.crashed, cfg.penalty);
        }
        total + pointmass_terminal_cost(env.pos, env.vel, cfg.goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free() -> PointMassConfig {
        PointMassConfig { obstacles: vec![], mass: 1.0, dt: 0.1, ..Default::default() }
    }

    #[test]
    fn free_particle() {
        let cfg = free();
        let mut e = PointMassEnv { pos: [0.0, 0.0], vel: [1.0, -0.5], crashed: false };
        let speed = (1.25f64).sqrt();
        for k in 1..=10 {
            assert!(!e.step(&cfg, [0.0, 0.0]));
            assert!((e.pos[0] - 0.1 * k as f64).abs() < 1e-12);
            let s = (e.vel[0] * e.vel[0] + e.vel[1] * e.vel[1]).sqrt();
            assert!((s - speed).abs() < 1e-12);
        }
    }

    #[test]
    fn single_push() {
        let cfg = free();
        let mut e = PointMassEnv { pos: [0.0, 0.0], vel: [0.0, 0.0], crashed: false };
        e.step(&cfg, [1.0, 0.0]);
        assert!((e.vel[0] - 0.1).abs() < 1e-15 && (e.pos[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn wall_crash_latches() {
        let cfg = free();
        let mut e = PointMassEnv { pos: [2.4, 0.0], vel: [4.0, 0.0], crashed: false };
        assert!(e.step(&cfg, [0.0, 0.0]));
        assert!(e.crashed);
        let p = e.pos;
        assert_eq!(p, [2.4, 0.0]);
        for _ in 0..5 {
            e.step(&cfg, [-10.0, 3.0]);
            assert_eq!(e.pos, p);
        }
    }

    #[test]
    fn costs() {
        assert_eq!(pointmass_cost([1.0, 1.0], [0.0; 2], [0.0; 2], [1.0, 1.0], false, 1e6), 0.0);
        assert_eq!(pointmass_terminal_cost([1.0, 1.0], [0.0; 2], [1.0, 1.0]), 0.0);
        let c = pointmass_cost([1.0, 0.0], [2.0, 0.0], [1.0, 1.0], [0.0, 0.0], false, 1e6);
        assert!((c - 1.9).abs() < 1e-12);
        assert!(pointmass_cost([0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2], true, 1e6) >= 1e6);
    }

    #[test]
    fn default_grid_and_json() {
        let cfg = PointMassConfig::default();
        assert_eq!(cfg.obstacles.len(), 16);
        assert!(!cfg.collides(cfg.start) && !cfg.collides(cfg.goal));
        assert!(cfg.collides([-0.5, -0.5]));
        let back = PointMassConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(PointMassConfig::from_json(r#"{"mass": 1.0}"#).is_err());
    }
}
