//! Kinematic Gaussian-splatting scene engine for robot manipulation.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod cli;
pub mod edit;
pub mod eval;
pub mod error;
pub mod kinematics;
pub mod metrics;
pub mod raster;
pub mod render;
pub mod splat;
pub mod synth;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};
