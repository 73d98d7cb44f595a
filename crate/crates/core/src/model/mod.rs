//! Stacked hourglass network: stem, recursive hourglass, per-stack heads with
//! intermediate supervision and feature remapping.

mod config;
mod forward;
mod params;

pub use config::ModelConfig;
pub use forward::{
    apply_batchnorm_updates, BatchNormUpdate, Forward, Mode, StackedOutput, BN_EPS, BN_MOMENTUM,
};
pub use params::{
    BatchNormParams, ConvParams, HourglassParams, Lowest, ParamBuilder, ParamEntry, ParamId,
    ParamKind, ParamStore, RemapParams, ResidualParams, StackParams, StackedModelParams,
    StemParams,
};
