//! Simulation of a cold district heating network coupled to a buried
//! seasonal ice storage.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over several parallel state slices read better in the kernels.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod ground;
pub mod hydraulics;
pub mod icestore;
pub mod pipe;
pub mod props;
pub mod scenario;
pub mod units;

pub use error::{Error, Result};
