#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod entrance;
pub mod error;
pub mod excursion;
pub mod fluctuation;
pub mod harness;
pub mod levy;
pub mod num;
pub mod quad;
pub mod rate;
pub mod rng;
pub mod selftest;
pub mod stats;
pub mod time_change;

pub use error::{Error, Result};
pub use num::Scalar;
pub use rate::{parse_rate, RateFunction};

/// Double-precision path, the form used by the simulators.
pub type Path = time_change::Path<f64>;
/// Single-precision path for storage-bound post-processing.
pub type Path32 = time_change::Path<f32>;
pub type PathStatus = time_change::PathStatus<f64>;
pub type QuadResult = quad::QuadResult<f64>;
