//! Trajectory optimization with path signatures and Stein variational
//! gradient descent.
//!
//! The crate is organised bottom-up:
//!
//! - [`sigcore`]: paths, truncated signatures and their algebra.
//! - [`sigkernel`]: static kernels, truncated and PDE signature kernels,
//!   Gram matrices and adjoint gradients.
//! - [`trajparam`]: natural cubic spline trajectories.
//! - [`steinopt`]: SVGD steps, priors, schedules, Adam, Monte Carlo scores.
//! - [`worlds`]: terrain, point-mass and planar-arm environments.
//! - [`drive`]: planners, receding-horizon controllers and metrics.
//! - [`runner`]: experiment grid execution and artifact emission.

pub mod error;

pub mod drive;
pub mod runner;
pub mod sigcore;
pub mod sigkernel;
pub mod steinopt;
pub mod trajparam;
pub mod worlds;

pub use error::{Error, Result};

/// Version string stamped into emitted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
