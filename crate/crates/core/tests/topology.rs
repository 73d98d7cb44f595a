use hourglass_core::autograd::{Graph, OpKind};
use hourglass_core::model::{
    Forward, Mode, ModelConfig, ParamBuilder, ParamKind, ParamStore, StackedModelParams,
};
use hourglass_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(shape: [usize; 4], seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(0.0..1.0))
}

#[test]
fn hourglass_preserves_shape_across_depths_and_widths() {
    for features in [8, 64, 256] {
        for depth in 1..=4 {
            let mut store = ParamStore::new();
            let hg = ParamBuilder::new(&mut store, 3).hourglass("hg", depth, features, 1);
            let side = 16;
            let mut g = Graph::new();
            // Batch of two: depth 4 on 16x16 bottoms out at 1x1 and batch norm needs two values.
            let x = g.constant(random_input([2, features, side, side], 1));
            let mut fwd = Forward::new(&mut g, &store, Mode::Train, false);
            let y = fwd.hourglass(x, &hg).unwrap();
            assert_eq!(
                g.value(y).shape(),
                &[2, features, side, side],
                "depth {depth} features {features}"
            );
        }
    }
}

#[test]
fn hourglass_rejects_indivisible_input() {
    let mut store = ParamStore::new();
    let hg = ParamBuilder::new(&mut store, 3).hourglass("hg", 3, 8, 1);
    let mut g = Graph::new();
    let x = g.constant(random_input([1, 8, 12, 12], 1));
    assert!(Forward::new(&mut g, &store, Mode::Train, false)
        .hourglass(x, &hg)
        .is_err());
}

fn stem_output(input: usize, features: usize) -> Vec<usize> {
    let cfg = ModelConfig {
        num_features: features,
        input_resolution: input,
        output_resolution: input / 4,
        ..ModelConfig::default()
    };
    let mut store = ParamStore::new();
    let stem = ParamBuilder::new(&mut store, 5).stem(&cfg);
    let mut g = Graph::new();
    let x = g.constant(random_input([1, 3, input, input], 2));
    let y = Forward::new(&mut g, &store, Mode::Train, false)
        .stem(x, &stem)
        .unwrap();
    g.value(y).shape().to_vec()
}

#[test]
fn stem_quarters_the_resolution() {
    assert_eq!(stem_output(256, 32), vec![1, 32, 64, 64]);
    assert_eq!(stem_output(64, 64), vec![1, 64, 16, 16]);
}

#[test]
fn stacked_forward_returns_one_heatmap_set_per_stack() {
    for stacks in 1..=3 {
        let cfg = ModelConfig {
            num_stacks: stacks,
            num_features: 16,
            num_joints: 5,
            input_resolution: 32,
            output_resolution: 8,
            ..ModelConfig::default()
        };
        let model = StackedModelParams::<f32>::init(&cfg, 1).unwrap();
        let mut g = Graph::new();
        let x = g.constant(random_input([2, 3, 32, 32], 3));
        let out = model.forward(&mut g, x, Mode::Train, false).unwrap();
        assert_eq!(out.heatmaps.len(), stacks);
        for h in &out.heatmaps {
            assert_eq!(g.value(*h).shape(), &[2, 5, 8, 8]);
        }
    }
}

#[test]
fn paper_configuration_bottoms_out_at_four_pixels() {
    let paper = ModelConfig::paper(16);
    paper.validate().unwrap();
    assert_eq!(paper.innermost_resolution(), 4);
    // The same hourglass run on its real 64x64 input: the smallest pooled map is 4x4.
    let mut store = ParamStore::new();
    let hg = ParamBuilder::new(&mut store, 1).hourglass("hg", paper.hourglass_depth, 32, 1);
    let mut g = Graph::new();
    let x = g.constant(random_input([1, 32, 64, 64], 4));
    Forward::new(&mut g, &store, Mode::Train, false)
        .hourglass(x, &hg)
        .unwrap();
    let smallest = g
        .op_kinds()
        .filter(|(k, _)| *k == OpKind::MaxPool2x2)
        .map(|(_, s)| s[2])
        .min()
        .unwrap();
    assert_eq!(smallest, 4);
}

#[test]
fn residual_count_per_resolution() {
    // Every residual module and every hourglass merge ends in one Add. Full resolution
    // holds up1 and the outer merge; each intermediate level holds low1, low3 and the
    // nested up1 plus its merge; the bottom level holds low1, the base and low3.
    for (depth, modules) in [(1, 1), (2, 1), (3, 2), (4, 1)] {
        let mut store = ParamStore::new();
        let hg = ParamBuilder::new(&mut store, 1).hourglass("hg", depth, 8, modules);
        let side = 32;
        let mut g = Graph::new();
        let x = g.constant(random_input([1, 8, side, side], 4));
        Forward::new(&mut g, &store, Mode::Train, false)
            .hourglass(x, &hg)
            .unwrap();
        let mut adds = std::collections::BTreeMap::new();
        for (k, s) in g.op_kinds() {
            if k == OpKind::Add {
                *adds.entry(s[2]).or_insert(0usize) += 1;
            }
        }
        for level in 0..=depth {
            let expected = match level {
                0 => modules + 1,
                l if l == depth => 3 * modules,
                _ => 3 * modules + 1,
            };
            assert_eq!(
                adds.get(&(side >> level)).copied().unwrap_or(0),
                expected,
                "depth {depth} level {level}"
            );
        }
        assert_eq!(adds.len(), depth + 1);
    }
}

#[test]
fn stacks_do_not_share_weights() {
    let cfg = ModelConfig {
        num_stacks: 3,
        num_features: 16,
        input_resolution: 32,
        output_resolution: 8,
        ..ModelConfig::default()
    };
    let model = StackedModelParams::<f32>::init(&cfg, 7).unwrap();
    let entries = model.store.entries();
    let names: std::collections::HashSet<&str> = entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names.len(), entries.len());
    for e in entries
        .iter()
        .filter(|e| e.name.starts_with("stack0.") && e.kind == ParamKind::Weight)
    {
        let twin = model
            .store
            .find(&e.name.replacen("stack0.", "stack1.", 1))
            .unwrap();
        assert_ne!(model.store.get(twin), &e.tensor, "{}", e.name);
    }
}

#[test]
fn loss_gradient_reaches_the_stem() {
    let cfg = ModelConfig {
        num_stacks: 2,
        num_features: 16,
        num_joints: 3,
        input_resolution: 32,
        output_resolution: 8,
        ..ModelConfig::default()
    };
    let model = StackedModelParams::<f32>::init(&cfg, 2).unwrap();
    let mut g = Graph::new();
    let x = g.constant(random_input([2, 3, 32, 32], 5));
    let out = model.forward(&mut g, x, Mode::Train, true).unwrap();
    let target = g.constant(random_input([2, 3, 8, 8], 6));
    let loss = hourglass_core::training::multi_stack_loss(&mut g, &out.heatmaps, target).unwrap();
    g.backward(loss).unwrap();
    let stem = model.store.find("stem.conv.weight").unwrap();
    let grad = g.grad(out.param_vars[stem.index()].unwrap()).unwrap();
    assert!(grad.iter().any(|&v| v != 0.0));
    for s in 0..2 {
        let head = model.store.find(&format!("stack{s}.head.weight")).unwrap();
        let grad = g.grad(out.param_vars[head.index()].unwrap()).unwrap();
        assert!(grad.iter().all(|&v| v != 0.0), "stack {s} head");
    }
}

#[test]
fn initialization_is_deterministic_and_bounded() {
    let cfg = ModelConfig::default();
    let a = StackedModelParams::<f32>::init(&cfg, 11).unwrap();
    let b = StackedModelParams::<f32>::init(&cfg, 11).unwrap();
    let c = StackedModelParams::<f32>::init(&cfg, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for e in a.store.entries() {
        assert!(
            e.tensor
                .data()
                .iter()
                .all(|v| v.is_finite() && v.abs() < 10.0),
            "{}",
            e.name
        );
    }
    assert_eq!(a.parameter_count(), cfg.parameter_count());
}

#[test]
fn eval_mode_is_independent_of_batch_composition() {
    let cfg = ModelConfig {
        num_features: 16,
        num_joints: 4,
        input_resolution: 32,
        output_resolution: 8,
        ..ModelConfig::default()
    };
    let mut model = StackedModelParams::<f32>::init(&cfg, 3).unwrap();
    let mut g = Graph::new();
    let x = g.constant(random_input([4, 3, 32, 32], 8));
    let out = model.forward(&mut g, x, Mode::Train, false).unwrap();
    hourglass_core::model::apply_batchnorm_updates(&mut model.store, &out.batchnorm_updates);

    let batch = random_input([3, 3, 32, 32], 9);
    let together = model.predict(&batch).unwrap();
    for n in 0..3 {
        let alone = model
            .predict(&Tensor::stack(&[batch.batch_item(n).unwrap()]).unwrap())
            .unwrap();
        for (t, a) in together.iter().zip(&alone) {
            let t = t.batch_item(n).unwrap();
            for (p, q) in t.data().iter().zip(a.batch_item(0).unwrap().data()) {
                assert!((p - q).abs() <= 1e-5 * (1.0 + p.abs()));
            }
        }
    }
}

#[test]
fn eval_before_statistics_is_an_error() {
    let cfg = ModelConfig {
        num_features: 8,
        input_resolution: 32,
        output_resolution: 8,
        ..ModelConfig::default()
    };
    let model = StackedModelParams::<f32>::init(&cfg, 3).unwrap();
    assert!(model.predict(&random_input([1, 3, 32, 32], 1)).is_err());
}
