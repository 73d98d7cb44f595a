//! Command-line interface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hourglass_core::dataset::JointLayout;
use hourglass_core::eval::{
    decode_batch, predict_samples, predict_with_flip, threshold_grid, EvalReport,
};
use hourglass_core::gradient_suite::run_gradient_suite;
use hourglass_core::synth::{generate, SkeletonSpec, SynthConfig};
use hourglass_core::training::crop_and_resize;
use hourglass_core::Tensor;
use serde::Serialize;

use crate::checkpoint;
use crate::config::{ExperimentConfig, SEED_ENV};
use crate::dataset::{self, Dataset};
use crate::experiment::{
    self, parameter_spread, parse_variants, run_ablation, write_ablation, DEFAULT_VARIANTS,
};
use crate::format::{self, sig6};
use crate::svg::{line_chart, Series};

#[derive(Debug, Parser)]
#[command(
    name = "hourglass",
    version,
    about = "Stacked hourglass keypoint estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic stick-figure dataset.
    Synth(SynthArgs),
    /// Train from an experiment file.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train architecture variants under one budget and compare them.
    Ablate(AblateArgs),
    /// Finite-difference gradient checks of every layer and a miniature model.
    Gradcheck(GradcheckArgs),
    /// Predict the joints of one person in one image.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().occlusion_prob)]
    pub occlusion_prob: f64,
    #[arg(long, default_value_t = SynthConfig::default().truncation_prob)]
    pub truncation_prob: f64,
    #[arg(long, default_value_t = SynthConfig::default().distractors)]
    pub distractors: usize,
    #[arg(long, default_value_t = 0.0)]
    pub distractor_figure_prob: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    /// Serial data preparation; runs are bit-reproducible. Always the case in this build.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Annotation file or dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Average predictions of the image and its mirror.
    #[arg(long)]
    pub flip: bool,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
    /// Also write PCK curves as SVG.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated STACKSxMODULES variants; suffix `-noint` disables
    /// intermediate supervision.
    #[arg(long, default_value = DEFAULT_VARIANTS)]
    pub variants: String,
    /// Report parameter counts without training.
    #[arg(long)]
    pub params_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Corrupt one backward pass to demonstrate that the check catches it.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Person center as `x,y` in image pixels.
    #[arg(long, value_parser = parse_pair)]
    pub center: [f64; 2],
    #[arg(long)]
    pub scale: f64,
    #[arg(long)]
    pub flip: bool,
    /// Write the final-stack heatmaps (K×R×R) as JSON.
    #[arg(long)]
    pub heatmaps: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([p(a)?, p(b)?])
}

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Predict(a) => predict(a),
    }
}

fn synth(a: SynthArgs) -> anyhow::Result<Outcome> {
    if a.count == 0 {
        bail!("--count must be at least 1");
    }
    let cfg = SynthConfig {
        image_size: a.size,
        occlusion_prob: a.occlusion_prob,
        truncation_prob: a.truncation_prob,
        distractors: a.distractors,
        distractor_figure_prob: a.distractor_figure_prob,
        ..SynthConfig::default()
    };
    let spec = SkeletonSpec::person();
    let samples: Vec<_> = generate(&spec, &cfg, a.count, a.seed)?
        .into_iter()
        .map(|s| s.sample)
        .collect();
    let k = spec.num_joints();
    let joints = (a.count * k) as f64;
    let present = samples
        .iter()
        .flat_map(|s| &s.annotation.present)
        .filter(|&&p| p)
        .count();
    let occluded = samples
        .iter()
        .flat_map(|s| s.annotation.present.iter().zip(&s.annotation.visible))
        .filter(|(&p, &v)| p && !v)
        .count();
    let path = dataset::export(
        &a.out,
        &Dataset {
            layout: spec.layout(),
            samples,
        },
    )?;
    println!(
        "wrote {} samples ({}x{} px, {} joints, seed {}) to {}",
        a.count,
        a.size,
        a.size,
        k,
        a.seed,
        path.display()
    );
    println!(
        "present joints {:.1}%, occluded joints {:.1}%",
        100.0 * present as f64 / joints,
        100.0 * occluded as f64 / joints
    );
    Ok(Outcome::Success)
}

fn train(a: TrainArgs) -> anyhow::Result<Outcome> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(n) = a.max_iterations {
        cfg.train.max_iterations = n;
    }
    let out = experiment::run_training(&cfg, a.resume.as_deref())?;
    let last = out.log.last();
    println!(
        "trained to iteration {} (lr {}); final validation PCK per stack: {}",
        out.trainer.state.iteration,
        sig6(out.trainer.state.learning_rate),
        last.map_or_else(String::new, |r| r
            .val_accuracy
            .iter()
            .map(|a| a.map_or_else(|| "-".into(), |v| format!("{:.1}%", 100.0 * v)))
            .collect::<Vec<_>>()
            .join(" "))
    );
    println!("outputs in {}", cfg.output_dir.display());
    Ok(Outcome::Success)
}

fn load_checkpoint(path: &Path) -> anyhow::Result<checkpoint::Checkpoint> {
    checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn flip_perm(layout: Option<&JointLayout>) -> anyhow::Result<Vec<usize>> {
    let layout =
        layout.context("--flip needs joint flip pairs, but the checkpoint has no joint layout")?;
    Ok(layout.flip_permutation()?)
}

fn eval(a: EvalArgs) -> anyhow::Result<Outcome> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let data = dataset::load(&a.data)?;
    let k = ckpt.model.config.num_joints;
    if data.layout.num_joints() != k {
        bail!(
            "checkpoint predicts {k} joints but the dataset has {}",
            data.layout.num_joints()
        );
    }
    let perm = if a.flip {
        Some(data.layout.flip_permutation()?)
    } else {
        None
    };
    let preds = predict_samples(&ckpt.model, &data.samples, perm.as_deref(), a.batch_size)?;
    let anns: Vec<_> = data.samples.iter().map(|s| s.annotation.clone()).collect();
    let thresholds = threshold_grid(0.5, 50);
    let report = EvalReport::build(&preds, &anns, &data.layout, a.threshold, &thresholds)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    format::write_eval_report(&a.out.join("report.csv"), &report)?;
    format::write_presence(&a.out.join("presence.csv"), &report)?;
    format::write_presence_auc(&a.out.join("presence_auc.csv"), &report)?;
    let text = format::summary(&report, &data.layout);
    format::write_text(&a.out.join("summary.txt"), &text)?;
    if a.svg {
        let series = [
            ("all", &report.curve),
            ("visible", &report.curve_visible),
            ("occluded", &report.curve_occluded),
        ]
        .iter()
        .map(|(label, curve)| Series {
            label: label.to_string(),
            points: curve
                .iter()
                .filter_map(|r| r.total().map(|v| (r.threshold, v)))
                .collect(),
        })
        .collect::<Vec<_>>();
        let svg = line_chart(
            "PCK curve",
            "normalized distance",
            "detection rate",
            (0.0, 0.5),
            (0.0, 1.0),
            &series,
        );
        format::write_text(&a.out.join("pck.svg"), &svg)?;
    }
    print!("{text}");
    Ok(Outcome::Success)
}

fn ablate(a: AblateArgs) -> anyhow::Result<Outcome> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let variants = parse_variants(&a.variants).map_err(anyhow::Error::msg)?;
    let rows = run_ablation(&cfg, &variants, !a.params_only)?;
    let out = a.out.unwrap_or_else(|| cfg.output_dir.join("ablation.csv"));
    write_ablation(&out, &rows)?;
    println!(
        "{:<14}{:>12}{:>10}{:>12}{:>12}",
        "variant", "parameters", "ratio", "final", "midpoint"
    );
    let first = rows.first().map_or(1, |r| r.parameters) as f64;
    let pct = |x: Option<f64>| x.map_or_else(|| "-".into(), |v| format!("{:.1}%", 100.0 * v));
    for r in &rows {
        println!(
            "{:<14}{:>12}{:>10.4}{:>12}{:>12}",
            r.variant.label(),
            r.parameters,
            r.parameters as f64 / first,
            pct(r.final_accuracy),
            pct(r.midpoint_accuracy)
        );
    }
    let spread = parameter_spread(&rows);
    if spread > 1.10 {
        println!(
            "warning: parameter counts differ by {:.1}% (more than 10%); the comparison is not equal-capacity",
            100.0 * (spread - 1.0)
        );
    }
    println!("wrote {}", out.display());
    Ok(Outcome::Success)
}

fn gradcheck(a: GradcheckArgs) -> anyhow::Result<Outcome> {
    let start = std::time::Instant::now();
    let entries = run_gradient_suite(a.inject_fault)?;
    println!(
        "{:<38}{:>8}{:>16}{:>8}{:>8}",
        "op", "result", "max rel error", "probes", "kinks"
    );
    let mut ok = true;
    for e in &entries {
        let pass = e.report.passed();
        ok &= pass;
        println!(
            "{:<38}{:>8}{:>16.3e}{:>8}{:>8}",
            e.name,
            if pass { "pass" } else { "FAIL" },
            e.report.max_rel_error(),
            e.report.probes(),
            e.report
                .inputs
                .iter()
                .map(|r| r.skipped_kinks)
                .sum::<usize>()
        );
    }
    println!(
        "{} in {:.1}s",
        if ok {
            "all checks passed"
        } else {
            "gradient check FAILED"
        },
        start.elapsed().as_secs_f64()
    );
    Ok(if ok {
        Outcome::Success
    } else {
        Outcome::Failure
    })
}

#[derive(Serialize)]
struct JointOut {
    name: String,
    x: f64,
    y: f64,
    max_activation: f64,
    mean_activation: f64,
}

#[derive(Serialize)]
struct HeatmapDump {
    shape: Vec<usize>,
    data: Vec<f32>,
}

fn predict(a: PredictArgs) -> anyhow::Result<Outcome> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let image = dataset::read_png(&a.image)?;
    let cfg = &ckpt.model.config;
    let (input, to_crop) = crop_and_resize(&image, a.center, a.scale, cfg.input_resolution)?;
    let batch = Tensor::stack(&[input])?;
    let heatmaps = if a.flip {
        predict_with_flip(&ckpt.model, &batch, &flip_perm(ckpt.layout.as_ref())?)?
    } else {
        ckpt.model
            .predict(&batch)?
            .pop()
            .context("model has no stacks")?
    };
    let joints = decode_batch(&heatmaps, &[to_crop], cfg.input_resolution)?.remove(0);
    let names: Vec<String> = match &ckpt.layout {
        Some(l) => l.names.clone(),
        None => (0..joints.len()).map(|k| format!("joint{k}")).collect(),
    };
    let out: Vec<JointOut> = joints
        .iter()
        .zip(names)
        .map(|(j, name)| JointOut {
            name,
            x: j.position[0],
            y: j.position[1],
            max_activation: j.max_activation,
            mean_activation: j.mean_activation,
        })
        .collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({ "joints": out }))?
    );
    if let Some(path) = &a.heatmaps {
        let [_, k, h, w] = heatmaps.dims4()?;
        let dump = HeatmapDump {
            shape: vec![k, h, w],
            data: heatmaps.data().to_vec(),
        };
        std::fs::write(path, serde_json::to_vec(&dump)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Outcome::Success)
}
