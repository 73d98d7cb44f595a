//! Rotation/scale/mirror augmentation. The crop center never moves: location of the
//! person is what tells the network whom to annotate.

use alloc::vec::Vec;

use rand::Rng;

use super::config::TrainConfig;
use super::crop::{crop_affine, warp};
use crate::dataset::Sample;
use crate::error::Result;
use crate::geometry::Affine2;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augmentation {
    pub rotation_deg: f64,
    /// Multiplies the crop window side.
    pub scale_factor: f64,
    pub mirror: bool,
}

impl Augmentation {
    pub const NONE: Self = Self {
        rotation_deg: 0.0,
        scale_factor: 1.0,
        mirror: false,
    };

    /// Rotation uniform in ±`rotation_max_deg`, scale uniform in `scale_jitter`,
    /// mirror with probability `flip_prob`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, cfg: &TrainConfig) -> Self {
        if !cfg.augment {
            return Self::NONE;
        }
        let r = cfg.rotation_max_deg;
        let [lo, hi] = cfg.scale_jitter;
        Self {
            rotation_deg: rng.random_range(-r..=r),
            scale_factor: rng.random_range(lo..=hi),
            mirror: cfg.flip_prob > 0.0 && rng.random_bool(cfg.flip_prob),
        }
    }
}

/// Network input and joints of one augmented sample, in crop coordinates.
#[derive(Debug, Clone)]
pub struct AugmentedSample {
    pub input: Tensor<f32>,
    pub to_crop: Affine2,
    pub joints: Vec<[f64; 2]>,
    /// Present in the annotation and inside the crop after transformation.
    pub present: Vec<bool>,
    pub visible: Vec<bool>,
}

/// Applies `aug` to a sample. Under a mirror, joint `k` of the result is joint
/// `flip_perm[k]` of the source. Joints leaving the crop are marked absent.
pub fn augment(
    sample: &Sample,
    aug: &Augmentation,
    flip_perm: &[usize],
    input_res: usize,
) -> Result<AugmentedSample> {
    let ann = &sample.annotation;
    let to_crop = crop_affine(
        ann.center,
        ann.scale * aug.scale_factor,
        input_res,
        aug.rotation_deg,
        aug.mirror,
    )?;
    let input = warp(&sample.image, &to_crop, input_res)?;
    let k = ann.num_joints();
    let source = |j: usize| if aug.mirror { flip_perm[j] } else { j };
    let res = input_res as f64;
    let mut joints = Vec::with_capacity(k);
    let mut present = Vec::with_capacity(k);
    let mut visible = Vec::with_capacity(k);
    for j in 0..k {
        let s = source(j);
        let p = to_crop.apply(ann.joints[s]);
        let inside = p[0] >= 0.0 && p[0] < res && p[1] >= 0.0 && p[1] < res;
        joints.push(p);
        present.push(ann.present[s] && inside);
        visible.push(ann.visible[s] && inside);
    }
    Ok(AugmentedSample {
        input,
        to_crop,
        joints,
        present,
        visible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Annotation;
    use crate::image::RgbImage;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Sample {
        let mut image = RgbImage::new(64, 64);
        for y in 0..64 {
            for x in 0..64 {
                image.put_pixel(x, y, [(x * 4) as u8, (y * 4) as u8, 128]);
            }
        }
        Sample {
            image,
            annotation: Annotation {
                image: "a.png".into(),
                center: [32.0, 32.0],
                scale: 0.32,
                joints: vec![[32.0, 32.0], [20.5, 40.25], [50.0, 10.0]],
                present: vec![true, true, false],
                visible: vec![true, false, false],
                norm_length: 5.0,
            },
        }
    }

    #[test]
    fn no_augmentation_is_plain_crop() {
        let s = sample();
        let a = augment(&s, &Augmentation::NONE, &[0, 1, 2], 64).unwrap();
        let (t, m) = super::super::crop::crop_and_resize(&s.image, [32.0, 32.0], 0.32, 64).unwrap();
        assert_eq!(a.input, t);
        assert_eq!(a.to_crop, m);
    }

    #[test]
    fn center_joint_is_fixed_under_any_draw() {
        let s = sample();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = TrainConfig {
            flip_prob: 0.5,
            ..TrainConfig::default()
        };
        for _ in 0..50 {
            let aug = Augmentation::sample(&mut rng, &cfg);
            assert!((-30.0..=30.0).contains(&aug.rotation_deg));
            assert!((0.75..=1.25).contains(&aug.scale_factor));
            let a = augment(&s, &aug, &[0, 2, 1], 64).unwrap();
            assert!((a.joints[0][0] - 32.0).abs() < 1e-9 && (a.joints[0][1] - 32.0).abs() < 1e-9);
        }
    }

    #[test]
    fn joints_follow_independent_affine() {
        let s = sample();
        let aug = Augmentation {
            rotation_deg: 21.0,
            scale_factor: 1.1,
            mirror: false,
        };
        let a = augment(&s, &aug, &[0, 1, 2], 64).unwrap();
        // direct evaluation of the rotate-about-center, scale and recenter map
        let side = 0.32 * 1.1 * 200.0;
        let k = 64.0 / side;
        let (sin, cos) = (-21.0f64).to_radians().sin_cos();
        for (j, p) in s.annotation.joints.iter().enumerate() {
            let (dx, dy) = (p[0] - 32.0, p[1] - 32.0);
            let expect = [
                k * (cos * dx - sin * dy) + 32.0,
                k * (sin * dx + cos * dy) + 32.0,
            ];
            assert!((a.joints[j][0] - expect[0]).abs() < 1e-6);
            assert!((a.joints[j][1] - expect[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn mirror_relabels_joints() {
        let s = sample();
        let aug = Augmentation {
            mirror: true,
            ..Augmentation::NONE
        };
        let a = augment(&s, &aug, &[0, 2, 1], 64).unwrap();
        // joint 1 of the result is source joint 2, mirrored
        let m = crop_affine([32.0, 32.0], 0.32, 64, 0.0, false).unwrap();
        let src = m.apply(s.annotation.joints[2]);
        assert!((a.joints[1][0] - (64.0 - src[0])).abs() < 1e-12);
        assert_eq!(a.present, vec![true, false, true]);
    }
}
