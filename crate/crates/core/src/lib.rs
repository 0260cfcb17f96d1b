//! Finite-rank purely deterministic approximation of stationary processes.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod converge;
pub mod error;
pub mod model;
pub mod pca;
pub mod realize;
pub mod repro;
pub mod sample;
pub mod spectrum;
pub mod toeplitz;

pub use error::{Error, Result};
