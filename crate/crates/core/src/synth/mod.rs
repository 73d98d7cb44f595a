//! Deterministic synthetic stick-figure dataset with exact joint annotations.

mod generate;
mod raster;
mod skeleton;

pub use generate::{generate, generate_one, SynthConfig, SynthSample, CROP_MARGIN, MIN_IMAGE_SIZE};
pub use skeleton::{JointSpec, SkeletonSpec};
