//! Flat parameter storage plus the structural handles that index into it.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::Result;
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Weight,
    Bias,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
    /// Number of batches folded into the running statistics.
    StatsCount,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        matches!(self, Self::Weight | Self::Bias | Self::Gamma | Self::Beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: Tensor<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Every tensor of a model, learnable or not, in creation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    entries: Vec<ParamEntry<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: String, kind: ParamKind, tensor: Tensor<T>) -> ParamId {
        self.entries.push(ParamEntry { name, kind, tensor });
        ParamId(self.entries.len() - 1)
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].tensor
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind.trainable())
            .map(|e| e.tensor.numel())
            .sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    kind: e.kind,
                    tensor: e.tensor.cast(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub name: String,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub count: ParamId,
}

/// Pre-activation bottleneck: `skip(x) + conv1x1(relu(bn(conv3x3(relu(bn(conv1x1(relu(bn(x)))))))))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub bn1: BatchNormParams,
    pub reduce: ConvParams,
    pub bn2: BatchNormParams,
    pub spatial: ConvParams,
    pub bn3: BatchNormParams,
    pub expand: ConvParams,
    /// 1×1 projection, present iff the channel count changes.
    pub skip: Option<ConvParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lowest {
    Nested(Box<HourglassParams>),
    Base(Vec<ResidualParams>),
}

/// One recursion level: `up1(x) + upsample(low3(low2(low1(pool(x)))))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourglassParams {
    pub depth: usize,
    pub up1: Vec<ResidualParams>,
    pub low1: Vec<ResidualParams>,
    pub low2: Lowest,
    pub low3: Vec<ResidualParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StemParams {
    pub conv: ConvParams,
    pub bn: BatchNormParams,
    pub res1: ResidualParams,
    pub res2: ResidualParams,
    pub res3: ResidualParams,
}

/// Remaps the stack's features and heatmaps back into the feature space of the next
/// stack.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapParams {
    pub features: ConvParams,
    pub heatmaps: ConvParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackParams {
    pub hourglass: HourglassParams,
    pub post: Vec<ResidualParams>,
    pub lin: ConvParams,
    pub lin_bn: BatchNormParams,
    pub head: ConvParams,
    pub remap: Option<RemapParams>,
}

/// Learnable parameters and batch-norm buffers of the stem plus every stack.
/// No tensor is shared between stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedModelParams<T> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub stem: StemParams,
    pub stacks: Vec<StackParams>,
}

/// Allocates named parameters with fan-in scaled normal weights
/// (std `√(2 / fan_in)`), zero biases and betas, unit gammas.
pub struct ParamBuilder<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<'a, T: Real> ParamBuilder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, seed: u64) -> Self {
        Self {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn conv(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
    ) -> ConvParams {
        let fan_in = (cin * kernel * kernel) as f64;
        let normal = Normal::new(0.0, num_traits::Float::sqrt(2.0 / fan_in)).expect("positive std");
        let rng = &mut self.rng;
        let weight = Tensor::from_fn([cout, cin, kernel, kernel], |_| T::of(normal.sample(rng)));
        ConvParams {
            weight: self
                .store
                .push(format!("{name}.weight"), ParamKind::Weight, weight),
            bias: self.store.push(
                format!("{name}.bias"),
                ParamKind::Bias,
                Tensor::zeros([cout]),
            ),
            stride,
            padding: kernel / 2,
        }
    }

    pub fn batchnorm(&mut self, name: &str, channels: usize) -> BatchNormParams {
        let s = &mut *self.store;
        BatchNormParams {
            name: name.into(),
            gamma: s.push(
                format!("{name}.gamma"),
                ParamKind::Gamma,
                Tensor::full([channels], T::one()),
            ),
            beta: s.push(
                format!("{name}.beta"),
                ParamKind::Beta,
                Tensor::zeros([channels]),
            ),
            running_mean: s.push(
                format!("{name}.running_mean"),
                ParamKind::RunningMean,
                Tensor::zeros([channels]),
            ),
            running_var: s.push(
                format!("{name}.running_var"),
                ParamKind::RunningVar,
                Tensor::full([channels], T::one()),
            ),
            count: s.push(
                format!("{name}.count"),
                ParamKind::StatsCount,
                Tensor::zeros([1]),
            ),
        }
    }

    pub fn residual(&mut self, name: &str, cin: usize, cout: usize) -> ResidualParams {
        let mid = cout / 2;
        ResidualParams {
            in_channels: cin,
            out_channels: cout,
            bn1: self.batchnorm(&format!("{name}.bn1"), cin),
            reduce: self.conv(&format!("{name}.reduce"), cin, mid, 1, 1),
            bn2: self.batchnorm(&format!("{name}.bn2"), mid),
            spatial: self.conv(&format!("{name}.spatial"), mid, mid, 3, 1),
            bn3: self.batchnorm(&format!("{name}.bn3"), mid),
            expand: self.conv(&format!("{name}.expand"), mid, cout, 1, 1),
            skip: (cin != cout).then(|| self.conv(&format!("{name}.skip"), cin, cout, 1, 1)),
        }
    }

    pub fn residuals(&mut self, name: &str, count: usize, channels: usize) -> Vec<ResidualParams> {
        (0..count)
            .map(|i| self.residual(&format!("{name}.{i}"), channels, channels))
            .collect()
    }

    pub fn hourglass(
        &mut self,
        name: &str,
        depth: usize,
        features: usize,
        modules: usize,
    ) -> HourglassParams {
        let up1 = self.residuals(&format!("{name}.up1"), modules, features);
        let low1 = self.residuals(&format!("{name}.low1"), modules, features);
        let low2 = if depth > 1 {
            Lowest::Nested(Box::new(self.hourglass(
                &format!("{name}.low2"),
                depth - 1,
                features,
                modules,
            )))
        } else {
            Lowest::Base(self.residuals(&format!("{name}.low2"), modules, features))
        };
        let low3 = self.residuals(&format!("{name}.low3"), modules, features);
        HourglassParams {
            depth,
            up1,
            low1,
            low2,
            low3,
        }
    }

    pub fn stem(&mut self, config: &ModelConfig) -> StemParams {
        let (c1, c2, f) = config.stem_channels();
        StemParams {
            conv: self.conv("stem.conv", 3, c1, 7, 2),
            bn: self.batchnorm("stem.bn", c1),
            res1: self.residual("stem.res1", c1, c2),
            res2: self.residual("stem.res2", c2, c2),
            res3: self.residual("stem.res3", c2, f),
        }
    }

    pub fn stack(&mut self, config: &ModelConfig, index: usize) -> StackParams {
        let (f, k, m) = (
            config.num_features,
            config.num_joints,
            config.modules_per_location,
        );
        let name = format!("stack{index}");
        StackParams {
            hourglass: self.hourglass(&format!("{name}.hg"), config.hourglass_depth, f, m),
            post: self.residuals(&format!("{name}.post"), m, f),
            lin: self.conv(&format!("{name}.lin"), f, f, 1, 1),
            lin_bn: self.batchnorm(&format!("{name}.lin_bn"), f),
            head: self.conv(&format!("{name}.head"), f, k, 1, 1),
            remap: (index + 1 < config.num_stacks).then(|| RemapParams {
                features: self.conv(&format!("{name}.remap_features"), f, f, 1, 1),
                heatmaps: self.conv(&format!("{name}.remap_heatmaps"), k, f, 1, 1),
            }),
        }
    }
}

impl<T: Real> StackedModelParams<T> {
    /// Deterministic initialization from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut b = ParamBuilder::new(&mut store, seed);
        let stem = b.stem(config);
        let stacks = (0..config.num_stacks).map(|i| b.stack(config, i)).collect();
        Ok(Self {
            config: config.clone(),
            store,
            stem,
            stacks,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.store.trainable_count()
    }

    /// Same structure with every tensor converted to another precision.
    pub fn cast<U: Real>(&self) -> StackedModelParams<U> {
        StackedModelParams {
            config: self.config.clone(),
            store: self.store.cast(),
            stem: self.stem.clone(),
            stacks: self.stacks.clone(),
        }
    }
}
