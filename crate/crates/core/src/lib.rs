//! Reshading-aware path tracer and the dataset pipeline built on it.

// `!(x > 0.0)` deliberately treats NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod image_io;
pub mod math;
pub mod rng;
pub mod scene;
pub mod tracer;
pub mod dataset;
pub mod signal;
pub mod relocation;
