//! Reverse-mode automatic differentiation over [`Tensor`](crate::Tensor)s.

pub mod gradcheck;
mod graph;
pub mod kernels;

pub use graph::{BatchStats, Graph, OpKind, Var};
