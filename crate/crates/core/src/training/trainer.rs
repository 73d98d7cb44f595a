//! The optimization loop: augment, forward, multi-stack loss, backward, rmsprop.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment, Augmentation};
use super::config::TrainConfig;
use super::loss::multi_stack_loss;
use super::targets::render_targets;
use crate::autograd::Graph;
use crate::dataset::{check_involution, Sample};
use crate::error::{invalid, Error, Result};
use crate::eval::{pck, positions, predict_samples, Stratum};
use crate::model::{apply_batchnorm_updates, Mode, StackedModelParams};
use crate::optim::{rmsprop_step, RmsPropConfig, RmsPropState};
use crate::tensor::Tensor;

/// PCK threshold used for validation during training.
pub const VALIDATION_THRESHOLD: f64 = 0.5;

/// Exact position of the trainer's random stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// 128-bit word position as (high, low).
    pub word_pos: [u64; 2],
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        let pos = rng.get_word_pos();
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: [(pos >> 64) as u64, pos as u64],
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos((u128::from(self.word_pos[0]) << 64) | u128::from(self.word_pos[1]));
        rng
    }
}

/// Everything besides parameters and optimizer moments needed to resume exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub iteration: u64,
    pub learning_rate: f64,
    pub lr_dropped: bool,
    pub best_accuracy: Option<f64>,
    pub evals_since_best: usize,
    /// Current epoch permutation and position in it.
    pub order: Vec<usize>,
    pub cursor: usize,
    /// Training loss accumulated since the last evaluation.
    pub loss_sum: f64,
    pub loss_count: u64,
    pub rng: RngState,
}

/// One evaluation row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: u64,
    pub lr: f64,
    /// Mean training loss since the previous row.
    pub train_loss: f64,
    /// Validation PCK per stack, earliest stack first; `None` when undefined.
    pub val_accuracy: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Hooks called by [`Trainer::run`].
pub trait TrainObserver {
    fn on_step(&mut self, _iteration: u64, _loss: f64) -> Control {
        Control::Continue
    }

    fn on_evaluation(&mut self, _row: &LogRow, _trainer: &Trainer) -> Control {
        Control::Continue
    }
}

/// Observer that never interrupts.
pub struct NoObserver;

impl TrainObserver for NoObserver {}

pub struct Trainer {
    pub model: StackedModelParams<f32>,
    pub config: TrainConfig,
    pub optimizer: RmsPropState<f32>,
    pub state: TrainState,
    flip_perm: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Fresh run seeded from `config.seed`.
    pub fn new(
        model: StackedModelParams<f32>,
        config: TrainConfig,
        flip_perm: Vec<usize>,
    ) -> Result<Self> {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let optimizer = RmsPropState::zeros_like(
            model
                .store
                .entries()
                .iter()
                .filter(|e| e.kind.trainable())
                .map(|e| e.tensor.numel()),
        );
        let state = TrainState {
            iteration: 0,
            learning_rate: config.learning_rate,
            lr_dropped: false,
            best_accuracy: None,
            evals_since_best: 0,
            order: Vec::new(),
            cursor: 0,
            loss_sum: 0.0,
            loss_count: 0,
            rng: RngState::capture(&rng),
        };
        Self::resume(model, config, optimizer, state, flip_perm)
    }

    /// Continues from saved parameters, optimizer moments and loop state.
    pub fn resume(
        model: StackedModelParams<f32>,
        config: TrainConfig,
        optimizer: RmsPropState<f32>,
        state: TrainState,
        flip_perm: Vec<usize>,
    ) -> Result<Self> {
        config.validate()?;
        model.config.validate()?;
        if flip_perm.len() != model.config.num_joints {
            return Err(invalid(
                "trainer",
                "flip permutation length differs from joint count",
            ));
        }
        check_involution(&flip_perm)?;
        let sizes: Vec<usize> = model
            .store
            .entries()
            .iter()
            .filter(|e| e.kind.trainable())
            .map(|e| e.tensor.numel())
            .collect();
        let state_sizes: Vec<usize> = optimizer.square_avg.iter().map(Vec::len).collect();
        if sizes != state_sizes {
            return Err(invalid(
                "trainer",
                "optimizer state does not match the model parameters",
            ));
        }
        let rng = state.rng.restore();
        Ok(Self {
            model,
            config,
            optimizer,
            state,
            flip_perm,
            rng,
        })
    }

    pub fn flip_permutation(&self) -> &[usize] {
        &self.flip_perm
    }

    /// Loop state with the random stream position synchronized.
    pub fn snapshot(&self) -> TrainState {
        let mut s = self.state.clone();
        s.rng = RngState::capture(&self.rng);
        s
    }

    fn next_batch(&mut self, dataset_len: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.config.batch_size);
        while batch.len() < self.config.batch_size {
            if self.state.cursor >= self.state.order.len() || self.state.order.len() != dataset_len
            {
                self.state.order = (0..dataset_len).collect();
                self.state.order.shuffle(&mut self.rng);
                self.state.cursor = 0;
            }
            batch.push(self.state.order[self.state.cursor]);
            self.state.cursor += 1;
        }
        batch
    }

    /// Builds augmented inputs (B×3×R×R) and targets (B×K×r×r) for `indices`.
    pub fn prepare_batch(
        &mut self,
        samples: &[Sample],
        indices: &[usize],
    ) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let cfg = &self.model.config;
        let (input_res, output_res) = (cfg.input_resolution, cfg.output_resolution);
        let k = output_res as f64 / input_res as f64;
        let mut inputs = Vec::with_capacity(indices.len());
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            let aug = Augmentation::sample(&mut self.rng, &self.config);
            let a = augment(&samples[i], &aug, &self.flip_perm, input_res)?;
            let joints: Vec<[f64; 2]> = a.joints.iter().map(|p| [p[0] * k, p[1] * k]).collect();
            let t = render_targets(&joints, &a.present, output_res, self.config.sigma_px)?;
            inputs.push(a.input);
            targets.push(t.values);
        }
        Ok((Tensor::stack(&inputs)?, Tensor::stack(&targets)?))
    }

    /// One optimization step on a batch drawn from `samples`; returns the loss.
    pub fn step(&mut self, samples: &[Sample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(invalid("train", "training set is empty"));
        }
        let k = self.model.config.num_joints;
        if let Some(s) = samples.iter().find(|s| s.annotation.num_joints() != k) {
            return Err(invalid(
                "train",
                alloc::format!(
                    "{} has {} joints, model expects {k}",
                    s.annotation.image,
                    s.annotation.num_joints()
                ),
            ));
        }
        let indices = self.next_batch(samples.len());
        let (inputs, targets) = self.prepare_batch(samples, &indices)?;
        let mut graph = Graph::new();
        let x = graph.constant(inputs);
        let out = self.model.forward(&mut graph, x, Mode::Train, true)?;
        let target = graph.constant(targets);
        let supervised = if self.config.intermediate_supervision {
            &out.heatmaps[..]
        } else {
            &out.heatmaps[out.heatmaps.len() - 1..]
        };
        let loss_var = multi_stack_loss(&mut graph, supervised, target)?;
        let loss = f64::from(graph.value(loss_var).data()[0]);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: self.state.iteration,
                loss,
                batch: indices,
            });
        }
        graph.backward(loss_var)?;
        let opt = RmsPropConfig {
            lr: self.state.learning_rate,
            alpha: self.config.rmsprop_alpha,
            eps: self.config.rmsprop_eps,
        };
        let vars: Vec<_> = self
            .model
            .store
            .entries()
            .iter()
            .zip(&out.param_vars)
            .filter(|(e, _)| e.kind.trainable())
            .map(|(_, v)| *v)
            .collect();
        let grads: Vec<Option<&[f32]>> =
            vars.iter().map(|v| v.and_then(|v| graph.grad(v))).collect();
        let mut params: Vec<&mut [f32]> = self
            .model
            .store
            .entries_mut()
            .iter_mut()
            .filter(|e| e.kind.trainable())
            .map(|e| e.tensor.data_mut())
            .collect();
        rmsprop_step(&mut params, &grads, &mut self.optimizer, &opt)?;
        drop(params);
        apply_batchnorm_updates(&mut self.model.store, &out.batchnorm_updates);
        self.state.iteration += 1;
        self.state.loss_sum += loss;
        self.state.loss_count += 1;
        Ok(loss)
    }

    /// Per-stack PCK at the validation threshold on un-augmented crops.
    pub fn evaluate(&self, samples: &[Sample]) -> Result<Vec<Option<f64>>> {
        let preds = predict_samples(&self.model, samples, None, self.config.batch_size.max(16))?;
        let anns: Vec<_> = samples.iter().map(|s| s.annotation.clone()).collect();
        preds
            .iter()
            .map(|p| Ok(pck(&positions(p), &anns, VALIDATION_THRESHOLD, Stratum::All)?.total()))
            .collect()
    }

    /// Updates the plateau tracker with the final-stack accuracy; drops the learning
    /// rate once after `plateau_patience` evaluations without a new best.
    pub fn record_accuracy(&mut self, accuracy: Option<f64>) -> bool {
        let acc = accuracy.unwrap_or(0.0);
        match self.state.best_accuracy {
            Some(best) if acc <= best => self.state.evals_since_best += 1,
            _ => {
                self.state.best_accuracy = Some(acc);
                self.state.evals_since_best = 0;
            }
        }
        if !self.state.lr_dropped && self.state.evals_since_best >= self.config.plateau_patience {
            self.state.learning_rate /= self.config.lr_drop_factor;
            self.state.lr_dropped = true;
            log::info!(
                "iteration {}: validation plateau, learning rate now {:e}",
                self.state.iteration,
                self.state.learning_rate
            );
            return true;
        }
        false
    }

    /// Evaluates, logs and feeds the plateau tracker.
    pub fn evaluation_row(&mut self, validation: &[Sample]) -> Result<LogRow> {
        let val_accuracy = self.evaluate(validation)?;
        let train_loss = if self.state.loss_count > 0 {
            self.state.loss_sum / self.state.loss_count as f64
        } else {
            f64::NAN
        };
        let row = LogRow {
            iteration: self.state.iteration,
            lr: self.state.learning_rate,
            train_loss,
            val_accuracy,
        };
        self.state.loss_sum = 0.0;
        self.state.loss_count = 0;
        self.record_accuracy(row.val_accuracy.last().copied().flatten());
        Ok(row)
    }

    /// Trains until `max_iterations` or until the observer stops; evaluates every
    /// `eval_interval` iterations and at the end.
    pub fn run(
        &mut self,
        train: &[Sample],
        validation: &[Sample],
        observer: &mut dyn TrainObserver,
    ) -> Result<Vec<LogRow>> {
        if train.is_empty() || validation.is_empty() {
            return Err(invalid(
                "train",
                "training and validation sets must be non-empty",
            ));
        }
        let mut log = Vec::new();
        let mut evaluated_at = None;
        while self.state.iteration < self.config.max_iterations {
            let loss = self.step(train)?;
            let it = self.state.iteration;
            if observer.on_step(it, loss) == Control::Stop {
                break;
            }
            if it.is_multiple_of(self.config.eval_interval) {
                let row = self.evaluation_row(validation)?;
                evaluated_at = Some(it);
                let control = observer.on_evaluation(&row, self);
                log.push(row);
                if control == Control::Stop {
                    break;
                }
            }
        }
        if evaluated_at != Some(self.state.iteration) && self.state.iteration > 0 {
            let row = self.evaluation_row(validation)?;
            observer.on_evaluation(&row, self);
            log.push(row);
        }
        Ok(log)
    }
}
