//! Stacked hourglass networks for single-person keypoint estimation, written from
//! scratch: dense tensors with reverse-mode autodiff, the hourglass model, heatmap
//! supervision and training, PCK evaluation, and a synthetic articulated-figure dataset.
//!
//! The crate is `no_std` (with `alloc`); the default `std` feature only enables
//! runtime SIMD detection in the matrix kernels.

#![no_std]
// Negated comparisons reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod autograd;
pub mod dataset;
mod error;
pub mod eval;
pub mod geometry;
pub mod gradient_suite;
pub mod image;
pub mod model;
pub mod optim;
mod real;
pub mod synth;
mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use real::Real;
pub use tensor::Tensor;
