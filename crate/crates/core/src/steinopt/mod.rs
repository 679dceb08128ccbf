//! Stein variational gradient descent.
//!
//! A [`ParticleSet`] holds flattened parameter vectors and a [`Decoder`]
//! mapping each vector to the [`Path`](crate::sigcore::Path) seen by
//! signature kernels. [`svgd_step`] applies one synchronous update.

mod adam;
mod config;
mod mc;
mod particles;
mod prior;
mod rng;
mod stein;
mod trace;

pub use adam::Adam;
pub use config::{anneal, Anneal, InferenceConfig};
pub use mc::mc_logpost_grad;
pub use particles::{Decoder, ParticleSet, SequenceDecoder};
pub use prior::{box_prior_logpdf_grad, compose_hyperprior, PriorSpec};
pub use rng::stream_rng;
pub use stein::{svgd_step, BandwidthPolicy, SteinKernel, StepStats};
pub use trace::{TraceRecord, TraceWriter};
