//! Person annotations and joint vocabulary shared by training, evaluation and the
//! synthetic generator.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::RgbImage;

/// One annotated person. Coordinates are continuous original-image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    /// Image path relative to the annotation file.
    pub image: String,
    pub center: [f64; 2],
    /// Crop window side is `scale · 200` pixels.
    pub scale: f64,
    pub joints: Vec<[f64; 2]>,
    /// Ground truth exists for the joint.
    pub present: Vec<bool>,
    /// Joint is not occluded.
    pub visible: Vec<bool>,
    /// PCK normalization length (head segment length for PCKh).
    pub norm_length: f64,
}

impl Annotation {
    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self, num_joints: usize) -> Result<()> {
        if self.joints.len() != num_joints
            || self.present.len() != num_joints
            || self.visible.len() != num_joints
        {
            return Err(invalid(
                "annotation",
                format!(
                    "expected {num_joints} joints, got joints={} present={} visible={}",
                    self.joints.len(),
                    self.present.len(),
                    self.visible.len()
                ),
            ));
        }
        if let Some(k) = (0..num_joints).find(|&k| self.visible[k] && !self.present[k]) {
            return Err(invalid(
                "annotation",
                format!("joint {k} is visible but not present"),
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid(
                "annotation",
                format!("scale {} must be positive", self.scale),
            ));
        }
        if !(self.norm_length > 0.0 && self.norm_length.is_finite()) {
            return Err(invalid(
                "annotation",
                format!("norm_length {} must be positive", self.norm_length),
            ));
        }
        let finite = |p: &[f64; 2]| p[0].is_finite() && p[1].is_finite();
        if !finite(&self.center) || !self.joints.iter().all(finite) {
            return Err(invalid("annotation", "coordinates must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: RgbImage,
    pub annotation: Annotation,
}

/// Joint names and the left/right pairs swapped by a horizontal mirror.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointLayout {
    pub names: Vec<String>,
    pub flip_pairs: Vec<[usize; 2]>,
}

impl JointLayout {
    pub fn num_joints(&self) -> usize {
        self.names.len()
    }

    /// `perm[k]` is the joint that `k` becomes under a mirror.
    pub fn flip_permutation(&self) -> Result<Vec<usize>> {
        let n = self.names.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut seen = alloc::vec![false; n];
        for &[a, b] in &self.flip_pairs {
            if a >= n || b >= n || a == b || seen[a] || seen[b] {
                return Err(invalid(
                    "flip_pairs",
                    format!("pair ({a}, {b}) is not a valid disjoint swap"),
                ));
            }
            seen[a] = true;
            seen[b] = true;
            perm[a] = b;
            perm[b] = a;
        }
        Ok(perm)
    }
}

/// Rejects permutations that are not their own inverse.
pub fn check_involution(perm: &[usize]) -> Result<()> {
    let n = perm.len();
    for (k, &p) in perm.iter().enumerate() {
        if p >= n || perm[p] != k {
            return Err(invalid(
                "flip permutation",
                format!("index {k} -> {p} is not involutive"),
            ));
        }
    }
    Ok(())
}
