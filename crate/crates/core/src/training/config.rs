use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization, augmentation and supervision settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// The learning rate is divided by this once, after validation accuracy plateaus.
    pub lr_drop_factor: f64,
    /// Evaluations without a new best accuracy that count as a plateau.
    pub plateau_patience: usize,
    pub rmsprop_alpha: f64,
    pub rmsprop_eps: f64,
    pub augment: bool,
    pub rotation_max_deg: f64,
    pub scale_jitter: [f64; 2],
    /// Probability of a horizontal mirror (with joint relabeling) per sample.
    pub flip_prob: f64,
    /// Gaussian target standard deviation in heatmap pixels.
    pub sigma_px: f64,
    pub batch_size: usize,
    pub max_iterations: u64,
    /// Validation runs every this many iterations.
    pub eval_interval: u64,
    /// Apply the loss to every stack's heatmaps; otherwise only to the last stack.
    pub intermediate_supervision: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2.5e-4,
            lr_drop_factor: 5.0,
            plateau_patience: 5,
            rmsprop_alpha: 0.99,
            rmsprop_eps: 1e-8,
            augment: true,
            rotation_max_deg: 30.0,
            scale_jitter: [0.75, 1.25],
            flip_prob: 0.0,
            sigma_px: 1.0,
            batch_size: 16,
            max_iterations: 2000,
            eval_interval: 100,
            intermediate_supervision: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("sigma_px", self.sigma_px)?;
        positive("rmsprop_eps", self.rmsprop_eps)?;
        if !(self.lr_drop_factor >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lr_drop_factor {} must be >= 1",
                self.lr_drop_factor
            )));
        }
        if !(0.0..1.0).contains(&self.rmsprop_alpha) {
            return Err(Error::InvalidConfig(format!(
                "rmsprop_alpha {} must lie in [0, 1)",
                self.rmsprop_alpha
            )));
        }
        if !(self.rotation_max_deg >= 0.0) {
            return Err(Error::InvalidConfig(
                "rotation_max_deg must be non-negative".into(),
            ));
        }
        let [lo, hi] = self.scale_jitter;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "scale_jitter [{lo}, {hi}] must contain 1"
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::InvalidConfig("flip_prob must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.plateau_patience == 0 || self.eval_interval == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, plateau_patience and eval_interval must be positive".into(),
            ));
        }
        Ok(())
    }
}
