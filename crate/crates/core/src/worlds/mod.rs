//! Experiment environments and their cost functionals.

mod arm;
mod halton;
mod pointmass;
mod terrain;

pub use arm::{arm_path_cost, arm_total_cost, dyn_cost, ArmCostBreakdown, DynNorm, Occupancy, PlanarArm};
pub use halton::{halton_2d, radical_inverse};
pub use pointmass::{pointmass_cost, pointmass_terminal_cost, Circle, PointMassConfig, PointMassEnv, StepRecord};
pub use terrain::{terrain_cost, TerrainField, LENGTH_WEIGHT};
