use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_involution, JointLayout};
use crate::error::{invalid, Result};

/// One joint and the bone that attaches it to its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    /// `None` for the root.
    pub parent: Option<usize>,
    /// Bone length as a fraction of figure height.
    pub length: f64,
    /// Bone direction range in degrees, relative to the parent bone (or to the figure's
    /// downward axis for children of the root). Positive angles turn toward image-left.
    pub angle_range: [f64; 2],
    pub color: [u8; 3],
    /// Bone radius as a fraction of figure height.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub joints: Vec<JointSpec>,
    pub flip_pairs: Vec<[usize; 2]>,
    /// Joint whose bone to the parent defines the head segment.
    pub head_top: usize,
}

impl SkeletonSpec {
    /// A 14-joint stick person facing the camera, so the person's right side is on
    /// the image left. Left and right limbs share colors, keeping mirrored samples
    /// consistent with relabeled joints.
    pub fn person() -> Self {
        let j = |name: &str,
                 parent: Option<usize>,
                 length: f64,
                 lo: f64,
                 hi: f64,
                 color: [u8; 3],
                 radius: f64| JointSpec {
            name: name.to_string(),
            parent,
            length,
            angle_range: [lo, hi],
            color,
            radius,
        };
        const THIGH: [u8; 3] = [40, 90, 220];
        const SHIN: [u8; 3] = [60, 200, 230];
        const HIP: [u8; 3] = [230, 220, 60];
        const UPPER_ARM: [u8; 3] = [220, 50, 50];
        const FOREARM: [u8; 3] = [240, 150, 40];
        const SHOULDER: [u8; 3] = [200, 70, 200];
        const HEAD: [u8; 3] = [90, 220, 90];
        let neck = Some(12);
        let hip_angle = 11.3;
        Self {
            joints: vec![
                j("right_ankle", Some(1), 0.23, -40.0, 20.0, SHIN, 0.03),
                j("right_knee", Some(2), 0.24, -15.0, 40.0, THIGH, 0.035),
                j(
                    "right_hip",
                    neck,
                    0.306,
                    hip_angle - 2.0,
                    hip_angle + 2.0,
                    HIP,
                    0.05,
                ),
                j(
                    "left_hip",
                    neck,
                    0.306,
                    -hip_angle - 2.0,
                    -hip_angle + 2.0,
                    HIP,
                    0.05,
                ),
                j("left_knee", Some(3), 0.24, -40.0, 15.0, THIGH, 0.035),
                j("left_ankle", Some(4), 0.23, -20.0, 40.0, SHIN, 0.03),
                j("right_wrist", Some(7), 0.14, -135.0, 10.0, FOREARM, 0.025),
                j("right_elbow", Some(8), 0.15, -120.0, 60.0, UPPER_ARM, 0.03),
                j("right_shoulder", neck, 0.11, 80.0, 95.0, SHOULDER, 0.035),
                j("left_shoulder", neck, 0.11, -95.0, -80.0, SHOULDER, 0.035),
                j("left_elbow", Some(9), 0.15, -60.0, 120.0, UPPER_ARM, 0.03),
                j("left_wrist", Some(10), 0.14, -10.0, 135.0, FOREARM, 0.025),
                j("neck", None, 0.0, 0.0, 0.0, HEAD, 0.0),
                j("head_top", neck, 0.16, 165.0, 195.0, HEAD, 0.06),
            ],
            flip_pairs: vec![[0, 5], [1, 4], [2, 3], [6, 11], [7, 10], [8, 9]],
            head_top: 13,
        }
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn layout(&self) -> JointLayout {
        JointLayout {
            names: self.joints.iter().map(|j| j.name.clone()).collect(),
            flip_pairs: self.flip_pairs.clone(),
        }
    }

    /// Joint indices with every parent before its children.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.joints.len();
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        while order.len() < n {
            let before = order.len();
            for (k, joint) in self.joints.iter().enumerate() {
                if !placed[k] && joint.parent.is_none_or(|p| placed[p]) {
                    placed[k] = true;
                    order.push(k);
                }
            }
            if order.len() == before {
                return Err(invalid("skeleton", "parent links contain a cycle"));
            }
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.joints.len();
        if n == 0 {
            return Err(invalid("skeleton", "no joints"));
        }
        let roots = self.joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(invalid(
                "skeleton",
                format!("expected one root, found {roots}"),
            ));
        }
        for (k, j) in self.joints.iter().enumerate() {
            if let Some(p) = j.parent {
                if p >= n || p == k {
                    return Err(invalid(
                        "skeleton",
                        format!("joint {k} has invalid parent {p}"),
                    ));
                }
                if !(j.length > 0.0) || !(j.radius > 0.0) {
                    return Err(invalid(
                        "skeleton",
                        format!("bone of joint {k} must have positive length and radius"),
                    ));
                }
                if !(j.angle_range[0] <= j.angle_range[1]) {
                    return Err(invalid(
                        "skeleton",
                        format!("joint {k} has an empty angle range"),
                    ));
                }
            }
        }
        self.topological_order()?;
        check_involution(&self.layout().flip_permutation()?)?;
        if self
            .joints
            .get(self.head_top)
            .and_then(|j| j.parent)
            .is_none()
        {
            return Err(invalid("skeleton", "head_top must name a non-root joint"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn person_is_valid() {
        let s = SkeletonSpec::person();
        s.validate().unwrap();
        assert_eq!(s.num_joints(), 14);
        let perm = s.layout().flip_permutation().unwrap();
        for (a, b) in perm.iter().enumerate() {
            let (na, nb) = (&s.joints[a].name, &s.joints[*b].name);
            assert_eq!(na.replace("left", "right"), nb.replace("left", "right"));
            assert_eq!(s.joints[a].color, s.joints[*b].color);
        }
    }

    #[test]
    fn cycle_is_rejected() {
        let mut s = SkeletonSpec::person();
        s.joints[12].parent = Some(13);
        assert!(s.validate().is_err());
    }
}
