//! Training runs and the stacks-versus-modules ablation, driven by an
//! [`ExperimentConfig`].

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use hourglass_core::dataset::{JointLayout, Sample};
use hourglass_core::model::{ModelConfig, StackedModelParams};
use hourglass_core::synth::{generate_one, SkeletonSpec};
use hourglass_core::training::{Control, LogRow, TrainObserver, Trainer};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Checkpoint};
use crate::config::ExperimentConfig;
use crate::dataset;
use crate::error::{io_err, Result};
use crate::format::sig6;
use crate::svg::{line_chart, Series};

pub const LOG_FILE: &str = "log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.hgnet";
pub const CURVES_FILE: &str = "curves.svg";

pub struct Data {
    pub layout: JointLayout,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

/// Loads the configured datasets, generating synthetic ones where no path is given.
/// Synthetic validation samples use indices after the training ones, so the two
/// sets never overlap.
pub fn load_data(cfg: &ExperimentConfig) -> Result<Data> {
    let spec = SkeletonSpec::person();
    let seed = cfg.train.seed;
    let synth = |range: std::ops::Range<usize>| -> Result<Vec<Sample>> {
        range
            .map(|i| Ok(generate_one(&spec, &cfg.data.synth, seed, i as u64)?.sample))
            .collect()
    };
    let (layout, train) = match &cfg.data.train {
        Some(path) => {
            let d = dataset::load(path)?;
            (d.layout, d.samples)
        }
        None => (spec.layout(), synth(0..cfg.data.synth_train)?),
    };
    let val = match &cfg.data.val {
        Some(path) => {
            let d = dataset::load(path)?;
            if d.layout.num_joints() != layout.num_joints() {
                return Err(hourglass_core::Error::InvalidConfig(format!(
                    "validation set has {} joints, training set {}",
                    d.layout.num_joints(),
                    layout.num_joints()
                ))
                .into());
            }
            d.samples
        }
        None if cfg.data.train.is_none() && cfg.data.synth_val > 0 => {
            synth(cfg.data.synth_train..cfg.data.synth_train + cfg.data.synth_val)?
        }
        None => train.clone(),
    };
    Ok(Data { layout, train, val })
}

/// Appends log rows to `log.csv`, checkpoints periodically and applies the optional
/// accuracy target.
pub struct RunObserver {
    pub dir: PathBuf,
    pub layout: JointLayout,
    pub checkpoint_interval: u64,
    pub target_accuracy: Option<f64>,
    pub last_checkpoint: u64,
    pub error: Option<crate::error::IoError>,
}

impl RunObserver {
    fn append_row(&self, row: &LogRow) -> Result<()> {
        let path = self.dir.join(LOG_FILE);
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(file);
        let mut rec = vec![
            row.iteration.to_string(),
            sig6(row.lr),
            sig6(row.train_loss),
        ];
        rec.extend(
            row.val_accuracy
                .iter()
                .map(|a| a.map_or_else(String::new, sig6)),
        );
        w.write_record(&rec)?;
        w.flush().map_err(io_err(&path))?;
        Ok(())
    }
}

impl TrainObserver for RunObserver {
    fn on_evaluation(&mut self, row: &LogRow, trainer: &Trainer) -> Control {
        log::info!(
            "iter {:>6}  lr {}  loss {}  val {}",
            row.iteration,
            sig6(row.lr),
            sig6(row.train_loss),
            row.val_accuracy
                .iter()
                .map(|a| a.map_or_else(|| "-".into(), |v| format!("{:.3}", v)))
                .collect::<Vec<_>>()
                .join(" ")
        );
        let mut result = self.append_row(row);
        if result.is_ok()
            && self.checkpoint_interval > 0
            && row.iteration >= self.last_checkpoint + self.checkpoint_interval
        {
            result = checkpoint::save(
                &self.dir.join(CHECKPOINT_FILE),
                &Checkpoint::from_trainer(trainer, Some(self.layout.clone())),
            );
            self.last_checkpoint = row.iteration;
        }
        if let Err(e) = result {
            self.error = Some(e);
            return Control::Stop;
        }
        match (
            self.target_accuracy,
            row.val_accuracy.last().copied().flatten(),
        ) {
            (Some(target), Some(acc)) if acc >= target => Control::Stop,
            _ => Control::Continue,
        }
    }
}

pub struct RunOutcome {
    pub trainer: Trainer,
    pub log: Vec<LogRow>,
    pub layout: JointLayout,
}

/// Trains per `cfg`, resuming from `resume` if given. Writes `log.csv`, the latest
/// checkpoint and `curves.svg` into the output directory.
pub fn run_training(cfg: &ExperimentConfig, resume: Option<&Path>) -> Result<RunOutcome> {
    let data = load_data(cfg)?;
    if data.layout.num_joints() != cfg.model.num_joints {
        return Err(hourglass_core::Error::InvalidConfig(format!(
            "dataset has {} joints, model.num_joints is {}",
            data.layout.num_joints(),
            cfg.model.num_joints
        ))
        .into());
    }
    let perm = data.layout.flip_permutation()?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut trainer = match resume {
        Some(path) => {
            let ckpt = checkpoint::load(path)?;
            if ckpt.model.config != cfg.model {
                return Err(hourglass_core::Error::InvalidConfig(
                    "checkpoint model config differs from the experiment".into(),
                )
                .into());
            }
            let mut t = ckpt.into_trainer(perm)?;
            t.config.max_iterations = cfg.train.max_iterations;
            t
        }
        None => {
            let model = StackedModelParams::init(&cfg.model, cfg.train.seed)?;
            Trainer::new(model, cfg.train.clone(), perm)?
        }
    };
    let log_path = dir.join(LOG_FILE);
    if resume.is_none() || !log_path.exists() {
        let mut header = vec!["iteration".to_string(), "lr".into(), "train_loss".into()];
        header.extend((1..=cfg.model.num_stacks).map(|s| format!("val_pck_stack{s}")));
        std::fs::write(&log_path, header.join(",") + "\n").map_err(io_err(&log_path))?;
    }
    let mut observer = RunObserver {
        dir: dir.clone(),
        layout: data.layout.clone(),
        checkpoint_interval: cfg.checkpoint_interval,
        target_accuracy: cfg.target_accuracy,
        last_checkpoint: trainer.state.iteration,
        error: None,
    };
    let log = trainer.run(&data.train, &data.val, &mut observer)?;
    if let Some(e) = observer.error {
        return Err(e);
    }
    checkpoint::save(
        &dir.join(CHECKPOINT_FILE),
        &Checkpoint::from_trainer(&trainer, Some(data.layout.clone())),
    )?;
    crate::format::write_text(
        &dir.join(CURVES_FILE),
        &training_curves(&log, "validation PCK@0.5 per stack"),
    )?;
    Ok(RunOutcome {
        trainer,
        log,
        layout: data.layout,
    })
}

/// Validation accuracy per stack against iteration.
pub fn training_curves(log: &[LogRow], title: &str) -> String {
    let stacks = log.first().map_or(0, |r| r.val_accuracy.len());
    let series: Vec<Series> = (0..stacks)
        .map(|s| Series {
            label: format!("stack {}", s + 1),
            points: log
                .iter()
                .filter_map(|r| r.val_accuracy[s].map(|a| (r.iteration as f64, a)))
                .collect(),
        })
        .collect();
    let max_it = log.last().map_or(1.0, |r| (r.iteration as f64).max(1.0));
    line_chart(
        title,
        "iteration",
        "PCK",
        (0.0, max_it),
        (0.0, 1.0),
        &series,
    )
}

/// One architecture of the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub num_stacks: usize,
    pub modules_per_location: usize,
    pub intermediate_supervision: bool,
}

impl Variant {
    pub fn label(&self) -> String {
        format!(
            "{}x{}{}",
            self.num_stacks,
            self.modules_per_location,
            if self.intermediate_supervision && self.num_stacks > 1 {
                "-int"
            } else {
                ""
            }
        )
    }

    pub fn model_config(&self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            num_stacks: self.num_stacks,
            modules_per_location: self.modules_per_location,
            ..base.clone()
        }
    }
}

/// Parses `8x1,4x2,2x4-noint`: stacks x modules, intermediate supervision unless
/// suffixed with `-noint`.
pub fn parse_variants(text: &str) -> std::result::Result<Vec<Variant>, String> {
    text.split(',')
        .map(|v| {
            let v = v.trim();
            let (body, int) = match v.strip_suffix("-noint") {
                Some(b) => (b, false),
                None => (v, true),
            };
            let (s, m) = body
                .split_once('x')
                .ok_or_else(|| format!("variant {v:?} is not STACKSxMODULES"))?;
            let parse = |x: &str| {
                x.parse::<usize>()
                    .map_err(|_| format!("variant {v:?} has a non-integer count"))
            };
            Ok(Variant {
                num_stacks: parse(s)?,
                modules_per_location: parse(m)?,
                intermediate_supervision: int,
            })
        })
        .collect()
}

pub const DEFAULT_VARIANTS: &str = "8x1,4x2,2x4,2x4-noint,1x8";

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub parameters: usize,
    pub final_accuracy: Option<f64>,
    /// Accuracy of the stack halfway through the network, if it has more than one.
    pub midpoint_accuracy: Option<f64>,
    pub per_stack: Vec<Option<f64>>,
}

/// Largest over smallest parameter count.
pub fn parameter_spread(rows: &[AblationRow]) -> f64 {
    let max = rows.iter().map(|r| r.parameters).max().unwrap_or(0) as f64;
    let min = rows.iter().map(|r| r.parameters).min().unwrap_or(0) as f64;
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Zero-based index of the stack halfway through an `n`-stack network.
pub fn midpoint_stack(n: usize) -> Option<usize> {
    (n > 1).then(|| n / 2 - 1)
}

/// Trains every variant with the same data, budget and seed.
pub fn run_ablation(
    cfg: &ExperimentConfig,
    variants: &[Variant],
    train: bool,
) -> Result<Vec<AblationRow>> {
    let data = if train { Some(load_data(cfg)?) } else { None };
    let mut rows = Vec::new();
    for v in variants {
        let model_cfg = v.model_config(&cfg.model);
        model_cfg.validate()?;
        let parameters = model_cfg.parameter_count();
        let mut per_stack = Vec::new();
        if let Some(data) = &data {
            log::info!(
                "ablation: training {} ({} parameters)",
                v.label(),
                parameters
            );
            let model = StackedModelParams::init(&model_cfg, cfg.train.seed)?;
            let mut tc = cfg.train.clone();
            tc.intermediate_supervision = v.intermediate_supervision;
            let mut trainer = Trainer::new(model, tc, data.layout.flip_permutation()?)?;
            trainer.run(
                &data.train,
                &data.val,
                &mut hourglass_core::training::NoObserver,
            )?;
            per_stack = trainer.evaluate(&data.val)?;
        }
        rows.push(AblationRow {
            variant: *v,
            parameters,
            final_accuracy: per_stack.last().copied().flatten(),
            midpoint_accuracy: midpoint_stack(v.num_stacks)
                .and_then(|i| per_stack.get(i).copied().flatten()),
            per_stack,
        });
    }
    Ok(rows)
}

pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "variant",
        "num_stacks",
        "modules_per_location",
        "intermediate_supervision",
        "parameters",
        "parameters_vs_first",
        "final_pck",
        "midpoint_pck",
        "per_stack_pck",
    ])?;
    let first = rows.first().map_or(1, |r| r.parameters) as f64;
    let opt = |x: Option<f64>| x.map_or_else(String::new, sig6);
    for r in rows {
        w.write_record([
            r.variant.label(),
            r.variant.num_stacks.to_string(),
            r.variant.modules_per_location.to_string(),
            r.variant.intermediate_supervision.to_string(),
            r.parameters.to_string(),
            sig6(r.parameters as f64 / first),
            opt(r.final_accuracy),
            opt(r.midpoint_accuracy),
            r.per_stack
                .iter()
                .map(|&a| opt(a))
                .collect::<Vec<_>>()
                .join(";"),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
