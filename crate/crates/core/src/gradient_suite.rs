//! Finite-difference checks of every differentiable primitive and of a miniature
//! one-stack model, in double precision.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::gradcheck::{finite_difference_check, GradCheckConfig, GradCheckReport};
use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::model::{Forward, Mode, ModelConfig, ParamId, StackedModelParams};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: String,
    pub report: GradCheckReport,
}

/// Configuration of the miniature model checked end to end.
pub fn miniature_config() -> ModelConfig {
    ModelConfig {
        num_stacks: 1,
        num_features: 8,
        num_joints: 3,
        hourglass_depth: 2,
        modules_per_location: 1,
        input_resolution: 32,
        output_resolution: 8,
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
}

fn positive(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(0.5..1.5))
}

type Op = fn(&mut Graph<f64>, &[Var]) -> Result<Var>;

fn primitives(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Op, Vec<Tensor<f64>>)> {
    let mut v: Vec<(&'static str, Op, Vec<Tensor<f64>>)> = Vec::new();
    v.push((
        "conv2d 3x3 stride 1",
        |g, x| g.conv2d(x[0], x[1], Some(x[2]), 1, 1),
        alloc::vec![
            random(&[2, 3, 5, 5], rng),
            random(&[4, 3, 3, 3], rng),
            random(&[4], rng)
        ],
    ));
    v.push((
        "conv2d 7x7 stride 2",
        |g, x| g.conv2d(x[0], x[1], Some(x[2]), 2, 3),
        alloc::vec![
            random(&[1, 2, 8, 8], rng),
            random(&[3, 2, 7, 7], rng),
            random(&[3], rng)
        ],
    ));
    v.push((
        "conv2d 1x1",
        |g, x| g.conv2d(x[0], x[1], None, 1, 0),
        alloc::vec![random(&[2, 4, 3, 3], rng), random(&[5, 4, 1, 1], rng)],
    ));
    v.push((
        "maxpool2x2",
        |g, x| g.maxpool2x2(x[0]),
        alloc::vec![random(&[2, 3, 6, 6], rng)],
    ));
    v.push((
        "upsample_nearest2x",
        |g, x| g.upsample_nearest2x(x[0]),
        alloc::vec![random(&[2, 3, 3, 4], rng)],
    ));
    v.push((
        "batchnorm train",
        |g, x| Ok(g.batchnorm_train(x[0], x[1], x[2], 1e-5)?.0),
        alloc::vec![
            random(&[3, 4, 3, 3], rng),
            positive(&[4], rng),
            random(&[4], rng)
        ],
    ));
    v.push((
        "batchnorm eval",
        |g, x| {
            g.batchnorm_eval(
                x[0],
                x[1],
                x[2],
                &[0.1, -0.2, 0.3, 0.0],
                &[0.5, 1.0, 2.0, 0.7],
                1e-5,
            )
        },
        alloc::vec![
            random(&[3, 4, 3, 3], rng),
            positive(&[4], rng),
            random(&[4], rng)
        ],
    ));
    v.push((
        "relu",
        |g, x| Ok(g.relu(x[0])),
        alloc::vec![random(&[2, 3, 4, 4], rng)],
    ));
    v.push((
        "add",
        |g, x| g.add(x[0], x[1]),
        alloc::vec![random(&[2, 3, 4, 4], rng), random(&[2, 3, 4, 4], rng)],
    ));
    v.push((
        "mse_loss",
        |g, x| g.mse_loss(x[0], x[1]),
        alloc::vec![random(&[2, 3, 4, 4], rng), random(&[2, 3, 4, 4], rng)],
    ));
    v
}

/// Runs every check. With `inject_fault`, the relu entry's backward is cut by a
/// detach so the suite must report a failure.
pub fn run_gradient_suite(inject_fault: bool) -> Result<Vec<SuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let cfg = GradCheckConfig::default();
    let mut out = Vec::new();
    for (name, op, inputs) in primitives(&mut rng) {
        let report = if inject_fault && name == "relu" {
            finite_difference_check(
                |g: &mut Graph<f64>, x: &[Var]| {
                    let y = g.relu(x[0]);
                    Ok(g.detach(y))
                },
                &inputs,
                &cfg,
            )?
        } else {
            finite_difference_check(op, &inputs, &cfg)?
        };
        out.push(SuiteEntry {
            name: name.into(),
            report,
        });
    }
    out.push(SuiteEntry {
        name: "miniature model (1 stack, depth 2)".into(),
        report: check_miniature_model(&mut rng)?,
    });
    Ok(out)
}

fn check_miniature_model(rng: &mut ChaCha8Rng) -> Result<GradCheckReport> {
    let config = miniature_config();
    let model = StackedModelParams::<f64>::init(&config, rng.random())?;
    let trainable: Vec<ParamId> = model
        .store
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind.trainable())
        .map(|(i, _)| ParamId(i))
        .collect();
    let mut inputs = alloc::vec![Tensor::from_fn([2, 3, 32, 32], |_| rng.random_range(0.0..1.0))];
    inputs.extend(trainable.iter().map(|&id| model.store.get(id).clone()));
    let cfg = GradCheckConfig {
        max_probes_per_input: Some(24),
        ..GradCheckConfig::default()
    };
    finite_difference_check(
        |g: &mut Graph<f64>, x: &[Var]| {
            let mut fwd = Forward::new(g, &model.store, Mode::Train, true);
            for (&id, &v) in trainable.iter().zip(&x[1..]) {
                fwd.bind(id, v);
            }
            let heatmaps = fwd.stacked(x[0], &model)?;
            Ok(heatmaps[0])
        },
        &inputs,
        &cfg,
    )
}
