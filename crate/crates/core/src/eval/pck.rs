use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Annotation;
use crate::error::{invalid, Result};

/// Which present joints are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratum {
    All,
    Visible,
    Occluded,
}

impl Stratum {
    fn admits(self, present: bool, visible: bool) -> bool {
        present
            && match self {
                Stratum::All => true,
                Stratum::Visible => visible,
                Stratum::Occluded => !visible,
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PckResult {
    pub threshold: f64,
    pub correct: Vec<usize>,
    pub counted: Vec<usize>,
}

impl PckResult {
    /// Accuracy of joint `k`; `None` when nothing was counted.
    pub fn joint(&self, k: usize) -> Option<f64> {
        ratio(self.correct[k], self.counted[k])
    }

    pub fn per_joint(&self) -> Vec<Option<f64>> {
        (0..self.counted.len()).map(|k| self.joint(k)).collect()
    }

    /// Pooled accuracy over the given joints.
    pub fn pooled(&self, joints: &[usize]) -> Option<f64> {
        let c = joints.iter().map(|&k| self.correct[k]).sum();
        let n = joints.iter().map(|&k| self.counted[k]).sum();
        ratio(c, n)
    }

    /// Pooled accuracy over all joints.
    pub fn total(&self) -> Option<f64> {
        ratio(self.correct.iter().sum(), self.counted.iter().sum())
    }
}

fn ratio(c: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| c as f64 / n as f64)
}

/// Normalized distance `‖pred − gt‖ / norm_length`.
pub fn normalized_distance(pred: [f64; 2], gt: [f64; 2], norm_length: f64) -> f64 {
    let (dx, dy) = (pred[0] - gt[0], pred[1] - gt[1]);
    num_traits::Float::sqrt(dx * dx + dy * dy) / norm_length
}

fn check_aligned(predictions: &[Vec<[f64; 2]>], annotations: &[Annotation]) -> Result<usize> {
    if predictions.len() != annotations.len() {
        return Err(invalid(
            "pck",
            format!(
                "{} predictions for {} annotations",
                predictions.len(),
                annotations.len()
            ),
        ));
    }
    let k = annotations.first().map_or(0, Annotation::num_joints);
    for (i, (p, a)) in predictions.iter().zip(annotations).enumerate() {
        if p.len() != k || a.num_joints() != k {
            return Err(invalid(
                "pck",
                format!("sample {i} has mismatched joint count"),
            ));
        }
    }
    Ok(k)
}

/// Joint `k` is correct iff its normalized distance is at most `threshold`. Only
/// present joints admitted by `stratum` are counted.
pub fn pck(
    predictions: &[Vec<[f64; 2]>],
    annotations: &[Annotation],
    threshold: f64,
    stratum: Stratum,
) -> Result<PckResult> {
    let k = check_aligned(predictions, annotations)?;
    let mut correct = vec![0; k];
    let mut counted = vec![0; k];
    for (pred, ann) in predictions.iter().zip(annotations) {
        for j in 0..k {
            if !stratum.admits(ann.present[j], ann.visible[j]) {
                continue;
            }
            counted[j] += 1;
            if normalized_distance(pred[j], ann.joints[j], ann.norm_length) <= threshold {
                correct[j] += 1;
            }
        }
    }
    Ok(PckResult {
        threshold,
        correct,
        counted,
    })
}

/// PCK at each of `thresholds` (ascending, non-empty).
pub fn pck_curve(
    predictions: &[Vec<[f64; 2]>],
    annotations: &[Annotation],
    thresholds: &[f64],
    stratum: Stratum,
) -> Result<Vec<PckResult>> {
    if thresholds.is_empty() {
        return Err(invalid("pck_curve", "no thresholds"));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(invalid("pck_curve", "thresholds must be sorted ascending"));
    }
    thresholds
        .iter()
        .map(|&t| pck(predictions, annotations, t, stratum))
        .collect()
}

/// Evenly spaced thresholds `0, step, …, max`.
pub fn threshold_grid(max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| max * i as f64 / steps as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilitySplit {
    pub all: PckResult,
    pub visible: PckResult,
    pub occluded: PckResult,
}

pub fn visibility_split_eval(
    predictions: &[Vec<[f64; 2]>],
    annotations: &[Annotation],
    threshold: f64,
) -> Result<VisibilitySplit> {
    Ok(VisibilitySplit {
        all: pck(predictions, annotations, threshold, Stratum::All)?,
        visible: pck(predictions, annotations, threshold, Stratum::Visible)?,
        occluded: pck(predictions, annotations, threshold, Stratum::Occluded)?,
    })
}
