use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::raster::Canvas;
use super::skeleton::SkeletonSpec;
use crate::dataset::{Annotation, Sample};
use crate::error::{invalid, Error, Result};
use crate::training::PIXELS_PER_SCALE;

/// Smallest supported image side.
pub const MIN_IMAGE_SIZE: usize = 32;

/// Crop window side relative to the larger side of the joint bounding box.
pub const CROP_MARGIN: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub image_size: usize,
    /// Figure height range as fractions of the image side.
    pub figure_height: [f64; 2],
    /// Probability that a rectangle hides one or more joints (visible=false).
    pub occlusion_prob: f64,
    /// Probability that a band along the bottom border cuts off the lowest joints
    /// (present=false).
    pub truncation_prob: f64,
    /// Background shapes per image.
    pub distractors: usize,
    /// Probability of a second, partially shown figure beside the annotated one.
    pub distractor_figure_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            figure_height: [0.6, 0.8],
            occlusion_prob: 0.2,
            truncation_prob: 0.1,
            distractors: 3,
            distractor_figure_prob: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < MIN_IMAGE_SIZE {
            return Err(Error::InvalidConfig(format!(
                "image size {} is too small for the figure (minimum {MIN_IMAGE_SIZE})",
                self.image_size
            )));
        }
        let [lo, hi] = self.figure_height;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "figure_height [{lo}, {hi}] must lie in (0, 1]"
            )));
        }
        for (name, p) in [
            ("occlusion_prob", self.occlusion_prob),
            ("truncation_prob", self.truncation_prob),
            ("distractor_figure_prob", self.distractor_figure_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} {p} must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// One generated image with its exact annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub sample: Sample,
    pub seed: u64,
    pub index: u64,
}

fn quantize(v: f64) -> f64 {
    Float::round(v * 1e6) / 1e6
}

fn rotate([x, y]: [f64; 2], degrees: f64) -> [f64; 2] {
    let (s, c) = Float::sin_cos(degrees.to_radians());
    [c * x - s * y, s * x + c * y]
}

fn random_color<R: Rng + ?Sized>(rng: &mut R, lo: u8, hi: u8) -> [u8; 3] {
    [
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
    ]
}

/// Joint positions of a random pose with the root at the origin, in figure-height units.
fn pose<R: Rng + ?Sized>(spec: &SkeletonSpec, order: &[usize], rng: &mut R) -> Vec<[f64; 2]> {
    let lean: f64 = rng.random_range(-10.0..=10.0);
    let down = rotate([0.0, 1.0], lean);
    let mut pos = vec![[0.0; 2]; spec.num_joints()];
    for &k in order {
        let joint = &spec.joints[k];
        let Some(p) = joint.parent else { continue };
        let reference = match spec.joints[p].parent {
            Some(g) => {
                let (dx, dy) = (pos[p][0] - pos[g][0], pos[p][1] - pos[g][1]);
                let n = Float::sqrt(dx * dx + dy * dy);
                [dx / n, dy / n]
            }
            None => down,
        };
        let [lo, hi] = joint.angle_range;
        let dir = rotate(reference, rng.random_range(lo..=hi));
        pos[k] = [
            pos[p][0] + dir[0] * joint.length,
            pos[p][1] + dir[1] * joint.length,
        ];
    }
    pos
}

fn draw_figure(canvas: &mut Canvas, spec: &SkeletonSpec, joints: &[[f64; 2]], height: f64) {
    let mut bones: Vec<usize> = (0..spec.num_joints())
        .filter(|&k| spec.joints[k].parent.is_some())
        .collect();
    // Thick bones first so limbs stay on top.
    bones.sort_by(|&a, &b| spec.joints[b].radius.total_cmp(&spec.joints[a].radius));
    for k in bones {
        let j = &spec.joints[k];
        let p = j.parent.expect("filtered to non-root joints");
        let r = (j.radius * height).max(0.8);
        if k == spec.head_top {
            let mid = [
                (joints[k][0] + joints[p][0]) / 2.0,
                (joints[k][1] + joints[p][1]) / 2.0,
            ];
            canvas.capsule(joints[p], mid, r * 0.5, j.color);
            canvas.disk(mid, r * 1.4, j.color);
        } else {
            canvas.capsule(joints[p], joints[k], r, j.color);
        }
    }
    for (k, j) in spec.joints.iter().enumerate() {
        let dark = j.color.map(|c| c / 3);
        canvas.disk(joints[k], (0.02 * height).max(0.7), dark);
    }
}

/// Sample `index` of the dataset identified by `seed`. Independent of every other index.
pub fn generate_one(
    spec: &SkeletonSpec,
    cfg: &SynthConfig,
    seed: u64,
    index: u64,
) -> Result<SynthSample> {
    spec.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let size = cfg.image_size as f64;
    let order = spec.topological_order()?;
    let max_radius = spec.joints.iter().map(|j| j.radius).fold(0.0, f64::max);

    let mut placed = None;
    for _ in 0..100 {
        let height = rng.random_range(cfg.figure_height[0]..=cfg.figure_height[1]) * size;
        let rel = pose(spec, &order, &mut rng);
        let margin = max_radius * height * 1.5 + 1.0;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &rel {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a] * height);
                hi[a] = hi[a].max(p[a] * height);
            }
        }
        let slack = [
            size - 2.0 * margin - (hi[0] - lo[0]),
            size - 2.0 * margin - (hi[1] - lo[1]),
        ];
        if slack[0] < 0.0 || slack[1] < 0.0 {
            continue;
        }
        let offset = [
            margin - lo[0] + rng.random_range(0.0..=slack[0]),
            margin - lo[1] + rng.random_range(0.0..=slack[1]),
        ];
        let joints: Vec<[f64; 2]> = rel
            .iter()
            .map(|p| {
                [
                    quantize(p[0] * height + offset[0]),
                    quantize(p[1] * height + offset[1]),
                ]
            })
            .collect();
        placed = Some((joints, height));
        break;
    }
    let (joints, height) = placed.ok_or_else(|| {
        invalid(
            "synth",
            format!("image size {} cannot fit the figure", cfg.image_size),
        )
    })?;

    let mut canvas = Canvas::new(cfg.image_size);
    let (bg_a, bg_b) = (
        random_color(&mut rng, 20, 140),
        random_color(&mut rng, 60, 200),
    );
    canvas.value_noise(&mut rng, (cfg.image_size / 6).max(4), bg_a, bg_b);
    for _ in 0..cfg.distractors {
        let c = random_color(&mut rng, 0, 255);
        let a = [rng.random_range(0.0..size), rng.random_range(0.0..size)];
        match rng.random_range(0..3) {
            0 => canvas.disk(a, rng.random_range(1.5..size / 8.0), c),
            1 => {
                let b = [rng.random_range(0.0..size), rng.random_range(0.0..size)];
                canvas.capsule(a, b, rng.random_range(0.5..1.5), c);
            }
            _ => {
                let (w, h) = (
                    rng.random_range(2..cfg.image_size / 6),
                    rng.random_range(2..cfg.image_size / 6),
                );
                let (x, y) = (a[0] as usize, a[1] as usize);
                canvas.rect(x, y, x + w, y + h, c, &mut rng);
            }
        }
    }
    if rng.random_bool(cfg.distractor_figure_prob) {
        let other = pose(spec, &order, &mut rng);
        let side = if joints[0][0] < size / 2.0 { 1.0 } else { -1.0 };
        let shift = [
            joints[order[0]][0] + side * height * 0.6,
            joints[order[0]][1],
        ];
        let other: Vec<[f64; 2]> = other
            .iter()
            .map(|p| [p[0] * height + shift[0], p[1] * height + shift[1]])
            .collect();
        draw_figure(&mut canvas, spec, &other, height);
    }
    draw_figure(&mut canvas, spec, &joints, height);

    let k = spec.num_joints();
    let mut present = vec![true; k];
    let mut visible = vec![true; k];
    let leaves: Vec<usize> = (0..k)
        .filter(|&j| {
            spec.joints[j].parent.is_some() && !spec.joints.iter().any(|c| c.parent == Some(j))
        })
        .collect();
    if rng.random_bool(cfg.occlusion_prob) {
        let target = joints[leaves[rng.random_range(0..leaves.len())]];
        let half = [
            rng.random_range(0.06..0.11) * height,
            rng.random_range(0.06..0.11) * height,
        ];
        let (x0, x1) = (target[0] - half[0], target[0] + half[0]);
        let (y0, y1) = (target[1] - half[1], target[1] + half[1]);
        let (px0, px1) = (
            Float::round(x0.max(0.0)) as usize,
            Float::round(x1.max(0.0)) as usize,
        );
        let (py0, py1) = (
            Float::round(y0.max(0.0)) as usize,
            Float::round(y1.max(0.0)) as usize,
        );
        let color = random_color(&mut rng, 0, 255);
        canvas.rect(px0, py0, px1, py1, color, &mut rng);
        for (j, p) in joints.iter().enumerate() {
            if p[0] >= px0 as f64 && p[0] < px1 as f64 && p[1] >= py0 as f64 && p[1] < py1 as f64 {
                visible[j] = false;
            }
        }
    }
    if rng.random_bool(cfg.truncation_prob) {
        let lowest = joints
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max);
        let band = Float::floor(lowest - rng.random_range(0.03..0.12) * height).max(0.0) as usize;
        let color = random_color(&mut rng, 0, 40);
        canvas.rect(0, band, cfg.image_size, cfg.image_size, color, &mut rng);
        for (j, p) in joints.iter().enumerate() {
            if p[1] >= band as f64 {
                present[j] = false;
                visible[j] = false;
            }
        }
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &joints {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let center = [
        quantize((lo[0] + hi[0]) / 2.0),
        quantize((lo[1] + hi[1]) / 2.0),
    ];
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let scale = quantize(CROP_MARGIN * extent / PIXELS_PER_SCALE);
    let head = joints[spec.head_top];
    let neck = joints[spec.joints[spec.head_top].parent.expect("validated")];
    let norm_length = quantize(Float::sqrt(
        (head[0] - neck[0]).powi(2) + (head[1] - neck[1]).powi(2),
    ));
    let annotation = Annotation {
        image: format!("images/{index:06}.png"),
        center,
        scale,
        joints,
        present,
        visible,
        norm_length,
    };
    annotation.validate(k)?;
    Ok(SynthSample {
        sample: Sample {
            image: canvas.into_image(),
            annotation,
        },
        seed,
        index,
    })
}

/// Samples `0..count` of the dataset identified by `seed`.
pub fn generate(
    spec: &SkeletonSpec,
    cfg: &SynthConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<SynthSample>> {
    if count == 0 {
        return Err(invalid("synth", "count must be at least 1"));
    }
    (0..count as u64)
        .map(|i| generate_one(spec, cfg, seed, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_index() {
        let spec = SkeletonSpec::person();
        let cfg = SynthConfig::default();
        let a = generate_one(&spec, &cfg, 9, 4).unwrap();
        let b = generate_one(&spec, &cfg, 9, 4).unwrap();
        assert_eq!(a, b);
        let all = generate(&spec, &cfg, 6, 9).unwrap();
        assert_eq!(all[4], a);
        assert_ne!(all[3].sample.image, a.sample.image);
    }

    #[test]
    fn no_occlusion_means_everything_visible() {
        let spec = SkeletonSpec::person();
        let cfg = SynthConfig {
            occlusion_prob: 0.0,
            truncation_prob: 0.0,
            ..SynthConfig::default()
        };
        for s in generate(&spec, &cfg, 50, 1).unwrap() {
            let a = &s.sample.annotation;
            assert!(a.present.iter().all(|&p| p) && a.visible.iter().all(|&v| v));
        }
    }

    #[test]
    fn present_joints_lie_inside_the_image() {
        let spec = SkeletonSpec::person();
        let cfg = SynthConfig {
            occlusion_prob: 0.5,
            truncation_prob: 0.5,
            ..SynthConfig::default()
        };
        for s in generate(&spec, &cfg, 100, 2).unwrap() {
            let a = &s.sample.annotation;
            for (p, &present) in a.joints.iter().zip(&a.present) {
                if present {
                    assert!(p[0] >= 0.0 && p[0] < 64.0 && p[1] >= 0.0 && p[1] < 64.0);
                }
            }
        }
    }

    #[test]
    fn rejects_tiny_images_and_zero_count() {
        let spec = SkeletonSpec::person();
        let cfg = SynthConfig {
            image_size: 16,
            ..SynthConfig::default()
        };
        assert!(generate_one(&spec, &cfg, 0, 0).is_err());
        assert!(generate(&spec, &SynthConfig::default(), 0, 0).is_err());
    }
}
