//! Natural cubic spline trajectories.
//!
//! Knot times are fixed and uniform; only knot values move. For fixed
//! times, sampling the spline is linear in the knot values, so decimation is
//! a matrix (cached per layout) and its transpose pulls path gradients back
//! onto the knots.

mod init;
mod spline;

pub use init::{init_knots, InitStrategy, PlanRequest};
pub use spline::{
    fit_and_decimate, knot_gradient_pullback, natural_second_derivatives, uniform_knot_times,
    Decimation, SplineDecoder, SplineTrajectory,
};
