//! Whole-dataset prediction and the aggregated evaluation report.

use alloc::string::String;
use alloc::vec::Vec;

use super::decode::{decode, heatmap_to_original};
use super::flip::predict_stacks_with_flip;
use super::pck::{pck, pck_curve, PckResult, Stratum};
use super::presence::{presence_pr, PresenceCurve};
use crate::dataset::{Annotation, JointLayout, Sample};
use crate::error::{invalid, Result};
use crate::model::StackedModelParams;
use crate::tensor::Tensor;
use crate::training::crop_and_resize;

/// One decoded joint in original-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPrediction {
    pub position: [f64; 2],
    pub max_activation: f64,
    pub mean_activation: f64,
}

/// Predictions indexed `[stack][sample][joint]`.
pub type StackPredictions = Vec<Vec<Vec<JointPrediction>>>;

/// Decodes an N×K×R×R heatmap batch and maps each joint back through the sample's
/// crop transform.
pub fn decode_batch(
    heatmaps: &Tensor<f32>,
    to_crop: &[crate::geometry::Affine2],
    input_res: usize,
) -> Result<Vec<Vec<JointPrediction>>> {
    let [n, k, h, w] = heatmaps.dims4()?;
    if to_crop.len() != n {
        return Err(invalid(
            "decode_batch",
            "one crop transform per sample is required",
        ));
    }
    let plane = h * w;
    let data = heatmaps.data();
    (0..n)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let off = (i * k + j) * plane;
                    let d = decode(&data[off..off + plane], w, h)?;
                    Ok(JointPrediction {
                        position: heatmap_to_original(d.position, input_res, w, &to_crop[i])?,
                        max_activation: f64::from(d.max_activation),
                        mean_activation: f64::from(d.mean_activation),
                    })
                })
                .collect()
        })
        .collect()
}

/// Runs the model over un-augmented center/scale crops of every sample, optionally with
/// flip averaging, and decodes every stack.
pub fn predict_samples(
    model: &StackedModelParams<f32>,
    samples: &[Sample],
    flip_perm: Option<&[usize]>,
    batch_size: usize,
) -> Result<StackPredictions> {
    let cfg = &model.config;
    let mut out: StackPredictions = (0..cfg.num_stacks)
        .map(|_| Vec::with_capacity(samples.len()))
        .collect();
    for chunk in samples.chunks(batch_size.max(1)) {
        let mut inputs = Vec::with_capacity(chunk.len());
        let mut crops = Vec::with_capacity(chunk.len());
        for s in chunk {
            let (t, m) = crop_and_resize(
                &s.image,
                s.annotation.center,
                s.annotation.scale,
                cfg.input_resolution,
            )?;
            inputs.push(t);
            crops.push(m);
        }
        let batch = Tensor::stack(&inputs)?;
        let stacks = match flip_perm {
            Some(perm) => predict_stacks_with_flip(model, &batch, perm)?,
            None => model.predict(&batch)?,
        };
        for (s, hm) in stacks.iter().enumerate() {
            out[s].extend(decode_batch(hm, &crops, cfg.input_resolution)?);
        }
    }
    Ok(out)
}

/// Positions only, for the PCK functions.
pub fn positions(predictions: &[Vec<JointPrediction>]) -> Vec<Vec<[f64; 2]>> {
    predictions
        .iter()
        .map(|joints| joints.iter().map(|j| j.position).collect())
        .collect()
}

/// Column order of the summary table.
pub const TABLE_COLUMNS: [&str; 8] = [
    "Head", "Shoulder", "Elbow", "Wrist", "Hip", "Knee", "Ankle", "Total",
];

/// Table column of a joint name (`Total` excluded); `None` for unknown names.
pub fn joint_group(name: &str) -> Option<usize> {
    let n = name.to_ascii_lowercase();
    if n.contains("head") || n.contains("neck") {
        return Some(0);
    }
    ["shoulder", "elbow", "wrist", "hip", "knee", "ankle"]
        .iter()
        .position(|g| n.contains(g))
        .map(|i| i + 1)
}

/// Summary row in [`TABLE_COLUMNS`] order, pooling the joints of each group.
pub fn table_row(result: &PckResult, layout: &JointLayout) -> [Option<f64>; 8] {
    let mut row = [None; 8];
    for (g, cell) in row.iter_mut().enumerate().take(7) {
        let joints: Vec<usize> = (0..layout.num_joints())
            .filter(|&k| joint_group(&layout.names[k]) == Some(g))
            .collect();
        *cell = result.pooled(&joints);
    }
    row[7] = result.total();
    row
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub joint_names: Vec<String>,
    pub reference_threshold: f64,
    pub all: PckResult,
    pub visible: PckResult,
    pub occluded: PckResult,
    /// PCK at the reference threshold of every stack, earliest first.
    pub per_stack: Vec<PckResult>,
    pub curve: Vec<PckResult>,
    pub curve_visible: Vec<PckResult>,
    pub curve_occluded: Vec<PckResult>,
    pub presence_mean: Vec<PresenceCurve>,
    pub presence_max: Vec<PresenceCurve>,
}

impl EvalReport {
    /// Builds the report from per-stack predictions; the last stack is the reported one.
    pub fn build(
        predictions: &StackPredictions,
        annotations: &[Annotation],
        layout: &JointLayout,
        reference_threshold: f64,
        thresholds: &[f64],
    ) -> Result<Self> {
        let last = predictions
            .last()
            .ok_or_else(|| invalid("eval report", "no stacks"))?;
        let pos = positions(last);
        let per_stack = predictions
            .iter()
            .map(|p| {
                pck(
                    &positions(p),
                    annotations,
                    reference_threshold,
                    Stratum::All,
                )
            })
            .collect::<Result<_>>()?;
        let k = layout.num_joints();
        let presence = |stat: fn(&JointPrediction) -> f64| -> Result<Vec<PresenceCurve>> {
            (0..k)
                .map(|j| {
                    let s: Vec<f64> = last.iter().map(|p| stat(&p[j])).collect();
                    let l: Vec<bool> = annotations.iter().map(|a| a.present[j]).collect();
                    presence_pr(&s, &l)
                })
                .collect()
        };
        Ok(Self {
            joint_names: layout.names.clone(),
            reference_threshold,
            all: pck(&pos, annotations, reference_threshold, Stratum::All)?,
            visible: pck(&pos, annotations, reference_threshold, Stratum::Visible)?,
            occluded: pck(&pos, annotations, reference_threshold, Stratum::Occluded)?,
            per_stack,
            curve: pck_curve(&pos, annotations, thresholds, Stratum::All)?,
            curve_visible: pck_curve(&pos, annotations, thresholds, Stratum::Visible)?,
            curve_occluded: pck_curve(&pos, annotations, thresholds, Stratum::Occluded)?,
            presence_mean: presence(|p| p.mean_activation)?,
            presence_max: presence(|p| p.max_activation)?,
        })
    }
}
