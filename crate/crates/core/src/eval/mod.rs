//! Heatmap decoding, flip-averaged inference and PCK-style metrics.

mod decode;
mod flip;
mod pck;
mod presence;
mod report;

pub use decode::{argmax, decode, heatmap_to_original, Decoded};
pub use flip::{flip_average, predict_stacks_with_flip, predict_with_flip};
pub use pck::{
    normalized_distance, pck, pck_curve, threshold_grid, visibility_split_eval, PckResult, Stratum,
    VisibilitySplit,
};
pub use presence::{presence_pr, PrPoint, PresenceCurve};
pub use report::{
    decode_batch, joint_group, positions, predict_samples, table_row, EvalReport, JointPrediction,
    StackPredictions, TABLE_COLUMNS,
};
