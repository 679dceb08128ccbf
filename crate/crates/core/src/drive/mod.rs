//! Planners, receding-horizon controllers and evaluation metrics.

mod cmaes;
mod diversity;
mod mpc;
mod plan;
mod problems;

pub use cmaes::{cmaes_step, CmaState};
pub use diversity::{diversity_metric, Diversity};
pub use mpc::{motion_primitives, mpc_episode, mppi_update, shift_hold, Controller, EpisodeResult, MpcConfig};
pub use plan::{plan, plan_with, KernelChoice, KernelConfig, Method, PlanConfig, PlanResult};
pub use problems::{ArmProblem, PathFollowProblem, Problem, QuadraticProblem, TerrainProblem};
