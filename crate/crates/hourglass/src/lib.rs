//! Files, checkpoints, experiments and the command-line interface around
//! `hourglass-core`.

pub mod annotations;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod experiment;
pub mod format;
pub mod svg;

pub use error::{IoError, Result};
