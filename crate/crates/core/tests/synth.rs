use hourglass_core::eval::decode;
use hourglass_core::synth::{generate, generate_one, SkeletonSpec, SynthConfig};
use hourglass_core::training::{crop_and_resize, render_targets};
use proptest::prelude::*;

#[test]
fn same_seed_and_index_is_bit_identical() {
    let spec = SkeletonSpec::person();
    let cfg = SynthConfig::default();
    let a = generate_one(&spec, &cfg, 9, 4).unwrap();
    let b = generate_one(&spec, &cfg, 9, 4).unwrap();
    assert_eq!(a, b);
    let batch = generate(&spec, &cfg, 6, 9).unwrap();
    assert_eq!(batch[4], a);
    assert_ne!(batch[3].sample.image, a.sample.image);
    assert_ne!(generate_one(&spec, &cfg, 10, 4).unwrap().sample, a.sample);
}

#[test]
fn zero_probabilities_give_fully_visible_figures() {
    let cfg = SynthConfig {
        occlusion_prob: 0.0,
        truncation_prob: 0.0,
        ..SynthConfig::default()
    };
    for s in generate(&SkeletonSpec::person(), &cfg, 50, 1).unwrap() {
        assert!(s.sample.annotation.present.iter().all(|&p| p));
        assert!(s.sample.annotation.visible.iter().all(|&v| v));
    }
}

#[test]
fn occlusion_rate_follows_the_probability() {
    let cfg = SynthConfig {
        occlusion_prob: 0.3,
        truncation_prob: 0.0,
        ..SynthConfig::default()
    };
    let data = generate(&SkeletonSpec::person(), &cfg, 1000, 2024).unwrap();
    let occluded = data
        .iter()
        .filter(|s| s.sample.annotation.visible.iter().any(|&v| !v))
        .count();
    let rate = occluded as f64 / 1000.0;
    assert!((rate - 0.3).abs() <= 0.03, "rate {rate}");
}

#[test]
fn statistics_are_seed_stable() {
    let cfg = SynthConfig::default();
    let spec = SkeletonSpec::person();
    let means = || {
        let data = generate(&spec, &cfg, 100, 77).unwrap();
        let mut m = vec![[0.0f64; 2]; spec.num_joints()];
        for s in &data {
            for (acc, p) in m.iter_mut().zip(&s.sample.annotation.joints) {
                acc[0] += p[0] / 100.0;
                acc[1] += p[1] / 100.0;
            }
        }
        m
    };
    let (a, b) = (means(), means());
    for (p, q) in a.iter().zip(&b) {
        assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
    }
}

#[test]
fn image_too_small_is_rejected() {
    let cfg = SynthConfig {
        image_size: 16,
        ..SynthConfig::default()
    };
    assert!(generate(&SkeletonSpec::person(), &cfg, 1, 0).is_err());
    assert!(generate(&SkeletonSpec::person(), &SynthConfig::default(), 0, 0).is_err());
}

#[test]
fn person_skeleton_is_consistent() {
    let spec = SkeletonSpec::person();
    spec.validate().unwrap();
    let perm = spec.layout().flip_permutation().unwrap();
    for k in 0..perm.len() {
        assert_eq!(perm[perm[k]], k);
    }
    assert_eq!(spec.topological_order().unwrap().len(), spec.num_joints());
}

#[test]
fn rendered_targets_decode_back_to_the_annotation() {
    let (input, output) = (64, 16);
    let data = generate(&SkeletonSpec::person(), &SynthConfig::default(), 40, 5).unwrap();
    let mut checked = 0;
    for s in &data {
        let a = &s.sample.annotation;
        let (_, to_crop) = crop_and_resize(&s.sample.image, a.center, a.scale, input).unwrap();
        let k = output as f64 / input as f64;
        let joints: Vec<[f64; 2]> = a
            .joints
            .iter()
            .map(|&p| {
                let c = to_crop.apply(p);
                [c[0] * k, c[1] * k]
            })
            .collect();
        let t = render_targets(&joints, &a.present, output, 1.0).unwrap();
        let plane = output * output;
        for (j, p) in joints.iter().enumerate() {
            if !a.present[j] || t.outside[j] {
                continue;
            }
            let d = decode(&t.values.data()[j * plane..(j + 1) * plane], output, output).unwrap();
            let (dx, dy) = (d.position[0] + 0.5 - p[0], d.position[1] + 0.5 - p[1]);
            assert!(dx.hypot(dy) <= 0.5, "sample {} joint {j}", s.index);
            checked += 1;
        }
    }
    assert!(checked > 400);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn annotations_satisfy_their_invariants(seed in 0u64..1_000_000, index in 0u64..1000) {
        let spec = SkeletonSpec::person();
        let cfg = SynthConfig::default();
        let s = generate_one(&spec, &cfg, seed, index).unwrap();
        let a = &s.sample.annotation;
        let size = cfg.image_size as f64;
        for j in 0..spec.num_joints() {
            if a.present[j] {
                prop_assert!(a.joints[j][0] >= 0.0 && a.joints[j][0] < size);
                prop_assert!(a.joints[j][1] >= 0.0 && a.joints[j][1] < size);
            } else {
                prop_assert!(!a.visible[j]);
            }
        }
        prop_assert!(a.norm_length > 0.0 && a.scale > 0.0);
    }
}
