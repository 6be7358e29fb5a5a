//! Simulation and numerical analysis of the stochastic pitchfork model
//! `dX = (βX - X³)dt + σ dL` driven by symmetric α-stable or truncated Lévy
//! noise.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod ensemble;
pub mod error;
pub mod fokker_planck;
pub mod lyapunov;
pub mod measures;
pub mod noise;
pub mod rng;
pub mod sde;
pub mod stats;

pub use attractor::{PullbackOptions, PullbackResult};
pub use error::{Error, Result};
pub use fokker_planck::{DensityGrid, GridSpec};
pub use measures::EmpiricalMeasure;
pub use noise::{NoiseConfig, NoiseMode, NoisePath, NoiseSource, TimeGrid};
pub use sde::{ModelParams, Scheme, Trajectory};
