//! Jump-adapted semi-discrete simulation of mean-reverting CIR/CEV delay
//! equations with compensated Poisson jumps:
//!
//! ```text
//! dx_t = (k1 - k2 x_{t-}) dt + k3 b(x_{t-tau}) x_{t-}^alpha dW_t + g(x_{t-}) dÑ_t,   t in [0, T]
//! x_t  = xi(t),                                                            t in [-tau, 0]
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and holds only the algorithmic
//! pieces: model description and step-size validation ([`model`]), noise
//! generation and the jump-adapted partition ([`noise`]), the steppers
//! ([`scheme`]) and small statistics helpers ([`stats`]). File formats,
//! Monte Carlo orchestration and the CLI live in the `jasdm` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod model;
pub mod noise;
pub mod scheme;
pub mod stats;

pub use model::{
    AssumptionBReport, DelayCoeff, InitialSegment, JumpCoeff, JumpStepReport, ModelError,
    ModelSpec, ModelSpecBuilder, SchemeConfig,
};
pub use noise::{JumpAdaptedGrid, NoiseBundle, NoiseError, Purpose};
pub use scheme::{DelaySource, SchemeError, StepInputs, Trajectory};
pub use stats::{MeanAccumulator, RateFit, StatsError};
