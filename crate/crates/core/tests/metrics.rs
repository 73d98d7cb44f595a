use hourglass_core::dataset::Annotation;
use hourglass_core::eval::{
    argmax, decode, pck, pck_curve, presence_pr, threshold_grid, visibility_split_eval, Stratum,
};
use hourglass_core::training::render_targets;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn annotation(
    joints: Vec<[f64; 2]>,
    present: Vec<bool>,
    visible: Vec<bool>,
    norm_length: f64,
) -> Annotation {
    Annotation {
        image: "x.png".into(),
        center: [0.0, 0.0],
        scale: 1.0,
        joints,
        present,
        visible,
        norm_length,
    }
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
) -> (Vec<Vec<[f64; 2]>>, Vec<Annotation>) {
    let mut preds = Vec::new();
    let mut anns = Vec::new();
    for _ in 0..n {
        let joints: Vec<[f64; 2]> = (0..k)
            .map(|_| [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)])
            .collect();
        let present: Vec<bool> = (0..k).map(|_| rng.random_bool(0.8)).collect();
        let visible: Vec<bool> = present.iter().map(|&p| p && rng.random_bool(0.7)).collect();
        preds.push(
            joints
                .iter()
                .map(|j| {
                    [
                        j[0] + rng.random_range(-6.0..6.0),
                        j[1] + rng.random_range(-6.0..6.0),
                    ]
                })
                .collect(),
        );
        anns.push(annotation(
            joints,
            present,
            visible,
            rng.random_range(2.0..8.0),
        ));
    }
    (preds, anns)
}

#[test]
fn decode_round_trip_within_half_pixel_and_better_than_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let res = 32;
    let (mut refined, mut plain) = (0.0, 0.0);
    for _ in 0..1000 {
        let joint = [rng.random_range(2.0..30.0), rng.random_range(2.0..30.0)];
        let t = render_targets(&[joint], &[true], res, 1.0).unwrap();
        let d = decode(t.values.data(), res, res).unwrap();
        let truth = [joint[0] - 0.5, joint[1] - 0.5];
        let err = |p: [f64; 2]| ((p[0] - truth[0]).powi(2) + (p[1] - truth[1]).powi(2)).sqrt();
        let e = err(d.position);
        assert!(e <= 0.5, "{joint:?} decoded to {:?}", d.position);
        refined += e;
        plain += err(argmax(t.values.data(), res));
    }
    assert!(refined < plain, "refined {refined} plain {plain}");
}

#[test]
fn flat_heatmap_is_degenerate() {
    let d = decode(&[0.3; 16], 4, 4).unwrap();
    assert!(d.degenerate);
    assert_eq!(d.position, [0.0, 0.0]);
    assert!(decode(&[0.0; 5], 2, 2).is_err());
}

proptest! {
    #[test]
    fn decode_is_translation_equivariant(
        x in 1usize..6, y in 1usize..6, dx in 0usize..4, dy in 0usize..4,
        left in 0.0f32..0.9, right in 0.0f32..0.9, up in 0.0f32..0.9, down in 0.0f32..0.9,
    ) {
        let (w, h) = (12, 12);
        let place = |ox: usize, oy: usize| {
            let mut hm = vec![0.0f32; w * h];
            hm[oy * w + ox] = 1.0;
            hm[oy * w + ox - 1] = left;
            hm[oy * w + ox + 1] = right;
            hm[(oy - 1) * w + ox] = up;
            hm[(oy + 1) * w + ox] = down;
            hm
        };
        let a = decode(&place(x, y), w, h).unwrap().position;
        let b = decode(&place(x + dx, y + dy), w, h).unwrap().position;
        prop_assert_eq!([a[0] + dx as f64, a[1] + dy as f64], b);
    }

    #[test]
    fn pck_is_invariant_to_common_scaling(seed in 0u64..10_000, exp in -4i32..5) {
        // Scaling by a power of two is exact in binary floating point.
        let c = 2f64.powi(exp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (preds, anns) = random_instance(&mut rng, 5, 4);
        let scaled_preds: Vec<Vec<[f64; 2]>> = preds.iter().map(|p| p.iter().map(|q| [q[0] * c, q[1] * c]).collect()).collect();
        let scaled_anns: Vec<Annotation> = anns
            .iter()
            .map(|a| annotation(
                a.joints.iter().map(|q| [q[0] * c, q[1] * c]).collect(),
                a.present.clone(),
                a.visible.clone(),
                a.norm_length * c,
            ))
            .collect();
        for t in [0.1, 0.5, 1.0] {
            prop_assert_eq!(
                pck(&preds, &anns, t, Stratum::All).unwrap(),
                pck(&scaled_preds, &scaled_anns, t, Stratum::All).unwrap()
            );
        }
    }

    #[test]
    fn pck_curve_is_nondecreasing(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (preds, anns) = random_instance(&mut rng, 6, 5);
        let curve = pck_curve(&preds, &anns, &threshold_grid(0.5, 20), Stratum::All).unwrap();
        for w in curve.windows(2) {
            for k in 0..5 {
                prop_assert!(w[0].correct[k] <= w[1].correct[k]);
            }
            prop_assert!(w[0].total() <= w[1].total());
        }
    }

    #[test]
    fn separating_statistic_has_unit_auc(n_pos in 1usize..20, n_neg in 1usize..20) {
        let stats: Vec<f64> = (0..n_pos).map(|i| 100.0 + i as f64).chain((0..n_neg).map(|i| i as f64)).collect();
        let labels: Vec<bool> = (0..n_pos + n_neg).map(|i| i < n_pos).collect();
        prop_assert_eq!(presence_pr(&stats, &labels).unwrap().auc, Some(1.0));
    }
}

#[test]
fn pck_matches_brute_force_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.random_range(1..6);
        let k = rng.random_range(1..5);
        let (preds, anns) = random_instance(&mut rng, n, k);
        let t = rng.random_range(0.0..1.5);
        for stratum in [Stratum::All, Stratum::Visible, Stratum::Occluded] {
            let result = pck(&preds, &anns, t, stratum).unwrap();
            for j in 0..k {
                let (mut correct, mut counted) = (0, 0);
                for (p, a) in preds.iter().zip(&anns) {
                    let admitted = match stratum {
                        Stratum::All => a.present[j],
                        Stratum::Visible => a.present[j] && a.visible[j],
                        Stratum::Occluded => a.present[j] && !a.visible[j],
                    };
                    if admitted {
                        counted += 1;
                        let (dx, dy) = (p[j][0] - a.joints[j][0], p[j][1] - a.joints[j][1]);
                        if dx.hypot(dy) / a.norm_length <= t {
                            correct += 1;
                        }
                    }
                }
                assert_eq!((result.correct[j], result.counted[j]), (correct, counted));
            }
        }
    }
}

#[test]
fn empty_stratum_is_undefined_not_zero() {
    let anns = vec![annotation(vec![[1.0, 1.0]], vec![true], vec![true], 1.0)];
    let r = pck(&[vec![[1.0, 1.0]]], &anns, 0.5, Stratum::Occluded).unwrap();
    assert_eq!(r.joint(0), None);
    assert_eq!(r.total(), None);
}

#[test]
fn visibility_split_pools_to_the_overall_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (preds, anns) = random_instance(&mut rng, 40, 6);
    let split = visibility_split_eval(&preds, &anns, 0.5).unwrap();
    for k in 0..6 {
        assert_eq!(
            split.all.counted[k],
            split.visible.counted[k] + split.occluded.counted[k]
        );
        assert_eq!(
            split.all.correct[k],
            split.visible.correct[k] + split.occluded.correct[k]
        );
    }
}

/// Trapezoidal precision-recall area from O(n²) pairwise rank counts: each positive
/// contributes one recall step of width 1/P whose endpoints are the precision just
/// before it and at it.
fn pairwise_pr_auc(stats: &[f64], labels: &[bool]) -> f64 {
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut area = 0.0;
    for (i, &s) in stats.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        let ranked = stats.iter().filter(|&&o| o >= s).count() as f64;
        let ranked_pos = stats
            .iter()
            .zip(labels)
            .filter(|(&o, &l)| l && o >= s)
            .count() as f64;
        let before = if ranked == 1.0 {
            1.0
        } else {
            (ranked_pos - 1.0) / (ranked - 1.0)
        };
        area += (before + ranked_pos / ranked) / 2.0 / positives;
    }
    area
}

#[test]
fn presence_auc_matches_the_pairwise_estimator() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = rng.random_range(2..60);
        let labels: Vec<bool> = (0..n)
            .map(|i| i == 0 || (i != 1 && rng.random_bool(0.5)))
            .collect();
        let stats: Vec<f64> = labels
            .iter()
            .map(|&l| rng.random_range(0.0..1.0) + if l { 0.3 } else { 0.0 })
            .collect();
        let mut sorted = stats.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(
            sorted.windows(2).all(|w| w[0] < w[1]),
            "trial {trial} has ties"
        );
        let auc = presence_pr(&stats, &labels).unwrap().auc.unwrap();
        assert!(
            (auc - pairwise_pr_auc(&stats, &labels)).abs() <= 1e-9,
            "trial {trial}"
        );
    }
}

#[test]
fn uninformative_statistic_sits_near_the_base_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 20_000;
    let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let stats: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let base = labels.iter().filter(|&&l| l).count() as f64 / n as f64;
    let auc = presence_pr(&stats, &labels).unwrap().auc.unwrap();
    assert!((auc - base).abs() < 0.02, "auc {auc} base {base}");
}

#[test]
fn single_class_auc_is_undefined() {
    assert_eq!(presence_pr(&[0.1, 0.5], &[true, true]).unwrap().auc, None);
    assert_eq!(presence_pr(&[0.1, 0.5], &[false, false]).unwrap().auc, None);
}
