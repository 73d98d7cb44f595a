//! Forward passes recorded on a [`Graph`].

use alloc::vec;
use alloc::vec::Vec;

use super::params::{
    BatchNormParams, ConvParams, HourglassParams, Lowest, ParamId, ParamStore, ResidualParams,
    StackedModelParams, StemParams,
};
use crate::autograd::{BatchStats, Graph, Var};
use crate::error::{invalid, Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are collected for later update.
    Train,
    /// Running statistics.
    Eval,
}

/// Batch statistics observed by one train-mode batch norm.
#[derive(Debug, Clone)]
pub struct BatchNormUpdate<T> {
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub count: ParamId,
    pub stats: BatchStats<T>,
}

/// Folds observed batch statistics into the running averages
/// (momentum 0.1, unbiased variance).
pub fn apply_batchnorm_updates<T: Real>(store: &mut ParamStore<T>, updates: &[BatchNormUpdate<T>]) {
    let momentum = T::of(BN_MOMENTUM);
    let keep = T::one() - momentum;
    for u in updates {
        let m = u.stats.count as f64;
        let unbias = T::of(m / (m - 1.0));
        for (r, &b) in store
            .get_mut(u.running_mean)
            .data_mut()
            .iter_mut()
            .zip(&u.stats.mean)
        {
            *r = keep * *r + momentum * b;
        }
        for (r, &b) in store
            .get_mut(u.running_var)
            .data_mut()
            .iter_mut()
            .zip(&u.stats.var)
        {
            *r = keep * *r + momentum * b * unbias;
        }
        let c = store.get_mut(u.count).data_mut();
        c[0] = c[0] + T::one();
    }
}

/// Binds parameters of a store into a graph on first use and runs layers.
pub struct Forward<'g, 'p, T> {
    pub graph: &'g mut Graph<T>,
    store: &'p ParamStore<T>,
    mode: Mode,
    track_grads: bool,
    vars: Vec<Option<Var>>,
    updates: Vec<BatchNormUpdate<T>>,
}

impl<'g, 'p, T: Real> Forward<'g, 'p, T> {
    pub fn new(
        graph: &'g mut Graph<T>,
        store: &'p ParamStore<T>,
        mode: Mode,
        track_grads: bool,
    ) -> Self {
        Self {
            graph,
            store,
            mode,
            track_grads,
            vars: vec![None; store.len()],
            updates: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.vars[id.index()] {
            return v;
        }
        let entry = self.store.entry(id);
        let v = self.graph.leaf(
            entry.tensor.clone(),
            self.track_grads && entry.kind.trainable(),
        );
        self.vars[id.index()] = Some(v);
        v
    }

    /// Uses `var` for parameter `id` instead of a fresh leaf.
    pub fn bind(&mut self, id: ParamId, var: Var) {
        self.vars[id.index()] = Some(var);
    }

    /// Graph variables of the parameters used so far, indexed like the store.
    pub fn param_vars(&self) -> &[Option<Var>] {
        &self.vars
    }

    pub fn finish(self) -> (Vec<Option<Var>>, Vec<BatchNormUpdate<T>>) {
        (self.vars, self.updates)
    }

    pub fn conv(&mut self, x: Var, p: &ConvParams) -> Result<Var> {
        let w = self.param(p.weight);
        let b = self.param(p.bias);
        self.graph.conv2d(x, w, Some(b), p.stride, p.padding)
    }

    pub fn batchnorm(&mut self, x: Var, p: &BatchNormParams) -> Result<Var> {
        let gamma = self.param(p.gamma);
        let beta = self.param(p.beta);
        match self.mode {
            Mode::Train => {
                let (y, stats) = self.graph.batchnorm_train(x, gamma, beta, BN_EPS)?;
                self.updates.push(BatchNormUpdate {
                    running_mean: p.running_mean,
                    running_var: p.running_var,
                    count: p.count,
                    stats,
                });
                Ok(y)
            }
            Mode::Eval => {
                if self.store.get(p.count).data()[0] <= T::zero() {
                    return Err(Error::MissingRunningStats(p.name.clone()));
                }
                let (mean, var) = (
                    self.store.get(p.running_mean),
                    self.store.get(p.running_var),
                );
                self.graph
                    .batchnorm_eval(x, gamma, beta, mean.data(), var.data(), BN_EPS)
            }
        }
    }

    fn bn_relu_conv(&mut self, x: Var, bn: &BatchNormParams, conv: &ConvParams) -> Result<Var> {
        let h = self.batchnorm(x, bn)?;
        let h = self.graph.relu(h);
        self.conv(h, conv)
    }

    pub fn residual(&mut self, x: Var, p: &ResidualParams) -> Result<Var> {
        let [_, c, _, _] = self.graph.value(x).dims4()?;
        if c != p.in_channels {
            return Err(Error::ShapeMismatch {
                op: "residual input channels",
                expected: vec![p.in_channels],
                actual: vec![c],
            });
        }
        let h = self.bn_relu_conv(x, &p.bn1, &p.reduce)?;
        let h = self.bn_relu_conv(h, &p.bn2, &p.spatial)?;
        let h = self.bn_relu_conv(h, &p.bn3, &p.expand)?;
        let skip = match &p.skip {
            Some(proj) => self.conv(x, proj)?,
            None => x,
        };
        self.graph.add(skip, h)
    }

    pub fn residuals(&mut self, mut x: Var, ps: &[ResidualParams]) -> Result<Var> {
        for p in ps {
            x = self.residual(x, p)?;
        }
        Ok(x)
    }

    pub fn hourglass(&mut self, x: Var, p: &HourglassParams) -> Result<Var> {
        let [_, _, h, w] = self.graph.value(x).dims4()?;
        let div = 1usize << p.depth;
        if h % div != 0 || w % div != 0 {
            return Err(invalid(
                "hourglass",
                alloc::format!("{h}x{w} not divisible by 2^{}", p.depth),
            ));
        }
        let up1 = self.residuals(x, &p.up1)?;
        let pooled = self.graph.maxpool2x2(x)?;
        let low1 = self.residuals(pooled, &p.low1)?;
        let low2 = match &p.low2 {
            Lowest::Nested(inner) => self.hourglass(low1, inner)?,
            Lowest::Base(rs) => self.residuals(low1, rs)?,
        };
        let low3 = self.residuals(low2, &p.low3)?;
        let up2 = self.graph.upsample_nearest2x(low3)?;
        self.graph.add(up1, up2)
    }

    pub fn stem(&mut self, image: Var, p: &StemParams) -> Result<Var> {
        let [_, c, h, w] = self.graph.value(image).dims4()?;
        if c != 3 {
            return Err(Error::ShapeMismatch {
                op: "stem input channels",
                expected: vec![3],
                actual: vec![c],
            });
        }
        if h % 4 != 0 || w % 4 != 0 {
            return Err(invalid(
                "stem",
                alloc::format!("input {h}x{w} is not divisible by 4"),
            ));
        }
        let x = self.conv(image, &p.conv)?;
        let x = self.batchnorm(x, &p.bn)?;
        let x = self.graph.relu(x);
        let x = self.residual(x, &p.res1)?;
        let x = self.graph.maxpool2x2(x)?;
        let x = self.residual(x, &p.res2)?;
        self.residual(x, &p.res3)
    }

    /// Full network; returns one N×K×R×R heatmap variable per stack.
    pub fn stacked(&mut self, image: Var, model: &StackedModelParams<T>) -> Result<Vec<Var>> {
        let cfg = &model.config;
        let [_, _, h, w] = self.graph.value(image).dims4()?;
        if h != cfg.input_resolution || w != cfg.input_resolution {
            return Err(Error::ShapeMismatch {
                op: "stacked_forward input",
                expected: vec![cfg.input_resolution, cfg.input_resolution],
                actual: vec![h, w],
            });
        }
        if model.stacks.len() != cfg.num_stacks {
            return Err(Error::InvalidConfig(alloc::format!(
                "config has {} stacks, parameters have {}",
                cfg.num_stacks,
                model.stacks.len()
            )));
        }
        let mut x = self.stem(image, &model.stem)?;
        let mut heatmaps = Vec::with_capacity(cfg.num_stacks);
        for stack in &model.stacks {
            let hg = self.hourglass(x, &stack.hourglass)?;
            let features = self.residuals(hg, &stack.post)?;
            let lin = self.conv(features, &stack.lin)?;
            let lin = self.batchnorm(lin, &stack.lin_bn)?;
            let lin = self.graph.relu(lin);
            let hm = self.conv(lin, &stack.head)?;
            heatmaps.push(hm);
            if let Some(remap) = &stack.remap {
                let f = self.conv(features, &remap.features)?;
                let r = self.conv(hm, &remap.heatmaps)?;
                let merged = self.graph.add(f, r)?;
                x = self.graph.add(x, merged)?;
            }
        }
        Ok(heatmaps)
    }
}

/// Result of a recorded forward pass through the stacked network.
pub struct StackedOutput<T> {
    pub heatmaps: Vec<Var>,
    /// Graph variable of each store entry that was used.
    pub param_vars: Vec<Option<Var>>,
    pub batchnorm_updates: Vec<BatchNormUpdate<T>>,
}

impl<T: Real> StackedModelParams<T> {
    /// Records the full forward pass on `graph`.
    pub fn forward(
        &self,
        graph: &mut Graph<T>,
        images: Var,
        mode: Mode,
        track_grads: bool,
    ) -> Result<StackedOutput<T>> {
        let mut fwd = Forward::new(graph, &self.store, mode, track_grads);
        let heatmaps = fwd.stacked(images, self)?;
        let (param_vars, batchnorm_updates) = fwd.finish();
        Ok(StackedOutput {
            heatmaps,
            param_vars,
            batchnorm_updates,
        })
    }

    /// Eval-mode heatmaps of every stack for a batch of N×3×R×R images.
    pub fn predict(&self, images: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut graph = Graph::new();
        let x = graph.constant(images.clone());
        let out = self.forward(&mut graph, x, Mode::Eval, false)?;
        Ok(out
            .heatmaps
            .iter()
            .map(|&v| graph.value(v).clone())
            .collect())
    }
}
