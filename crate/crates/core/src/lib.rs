//! Simulation and analysis of cavity-enhanced spin squeezing in a
//! free-fall matter-wave interferometer.

pub mod analysis;
pub mod cavity;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kinematics;
mod fit;
pub mod rng;
pub mod vibration;
pub mod spin;

pub use error::{Error, Result};
pub use spin::{
    expect, husimi_q, new_css, rotate, sample_jz, CollectiveSpinState, HalfInteger, JzSampler,
    SpinMoments, SpinProjectionAxis,
};
