//! Joint antenna-pointing and offloading optimization for mobile edge
//! computing with rotatable antennas.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod pointing;
pub mod resource;
pub mod saho;
pub mod sca;
pub mod scenario;

pub use error::{Error, Result};
