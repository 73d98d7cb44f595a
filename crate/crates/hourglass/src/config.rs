//! Declarative experiment files (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use hourglass_core::model::ModelConfig;
use hourglass_core::synth::SynthConfig;
use hourglass_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, IoError, Result};

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "HG_SEED";

/// Training and validation data. Paths are annotation files or dataset directories,
/// relative to the experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    /// Defaults to the training set.
    pub val: Option<PathBuf>,
    /// When `train` is unset, generate this many synthetic training samples.
    pub synth_train: usize,
    /// When `val` is unset and `synth_val > 0`, generate held-out synthetic samples.
    pub synth_val: usize,
    pub synth: SynthConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: None,
            val: None,
            synth_train: 16,
            synth_val: 0,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Overrides `train.seed`; falls back to `HG_SEED`, then to `train.seed`.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Iterations between checkpoints; 0 saves only at the end.
    pub checkpoint_interval: u64,
    /// Stop once final-stack validation accuracy reaches this value.
    pub target_accuracy: Option<f64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: PathBuf::from("runs/default"),
            checkpoint_interval: 500,
            target_accuracy: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
        }
    }
}

/// Seed from the environment, if set and parseable.
pub fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| IoError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(seed) = cfg.seed.or_else(env_seed) {
            cfg.train.seed = seed;
        }
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.train, &mut cfg.data.val]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate().map_err(|e| IoError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> hourglass_core::Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.data.synth.validate()?;
        if self.data.train.is_none() && self.data.synth_train == 0 {
            return Err(hourglass_core::Error::InvalidConfig(
                "data.train is unset and data.synth_train is 0".into(),
            ));
        }
        Ok(())
    }
}
