//! Cropping, augmentation, heatmap targets, the multi-stack loss and the training loop.

mod augment;
mod config;
mod crop;
mod loss;
mod targets;
mod trainer;

pub use augment::{augment, Augmentation, AugmentedSample};
pub use config::TrainConfig;
pub use crop::{crop_affine, crop_and_resize, warp, PIXELS_PER_SCALE};
pub use loss::multi_stack_loss;
pub use targets::{render_targets, HeatmapSet};
pub use trainer::{
    Control, LogRow, NoObserver, RngState, TrainObserver, TrainState, Trainer, VALIDATION_THRESHOLD,
};
