//! Tape of executed primitives with reverse-mode gradient propagation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, ConvGeom};
use crate::error::{invalid, Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Handle to a value recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Kind of a recorded operation, exposed for topology inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Conv2d { kernel: usize, stride: usize },
    MaxPool2x2,
    Upsample2x,
    BatchNorm { batch_stats: bool },
    Relu,
    Add,
    MseLoss,
    Sum,
    Detach,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    MaxPool {
        x: Var,
        argmax: Vec<u32>,
    },
    Upsample {
        x: Var,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    Relu {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mse {
        pred: Var,
        target: Var,
    },
    Sum {
        x: Var,
        weights: Option<Vec<T>>,
    },
    Detach,
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: Op<T>,
}

/// Batch statistics measured by a train-mode batch norm.
#[derive(Debug, Clone)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased (population) variance used for normalization.
    pub var: Vec<T>,
    /// Number of values reduced per channel.
    pub count: usize,
}

/// Ordered record of executed primitives. Nodes are appended in execution order, so
/// every operation's inputs precede it.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records an input tensor. Gradients are accumulated only for leaves created with
    /// `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<T>> {
        self.nodes[v.0].grad.take()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    pub fn op_kinds(&self) -> impl Iterator<Item = (OpKind, &[usize])> + '_ {
        self.nodes.iter().map(|n| {
            let kind = match &n.op {
                Op::Leaf => OpKind::Leaf,
                Op::Conv2d { geom, .. } => OpKind::Conv2d {
                    kernel: geom.kh,
                    stride: geom.stride,
                },
                Op::MaxPool { .. } => OpKind::MaxPool2x2,
                Op::Upsample { .. } => OpKind::Upsample2x,
                Op::BatchNorm { batch_stats, .. } => OpKind::BatchNorm {
                    batch_stats: *batch_stats,
                },
                Op::Relu { .. } => OpKind::Relu,
                Op::Add { .. } => OpKind::Add,
                Op::Mse { .. } => OpKind::MseLoss,
                Op::Sum { .. } => OpKind::Sum,
                Op::Detach => OpKind::Detach,
            };
            (kind, n.value.shape())
        })
    }

    /// Hash of every piecewise-linear branch taken (relu signs, pooling winners).
    /// Two evaluations with equal signatures lie on the same linear piece.
    pub fn activation_signature(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(PRIME);
        };
        for node in &self.nodes {
            match &node.op {
                Op::Relu { x } => {
                    for chunk in self.nodes[x.0].value.data().chunks(64) {
                        let bits = chunk
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (i, &v)| acc | (u64::from(v > T::zero()) << i));
                        mix(bits);
                    }
                }
                Op::MaxPool { argmax, .. } => argmax.iter().for_each(|&a| mix(u64::from(a))),
                _ => {}
            }
        }
        h
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                expected: sa.to_vec(),
                actual: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// Cross-correlation of `x` (N×Cin×H×W) with `w` (Cout×Cin×kh×kw) plus optional bias.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let [n, cin, h, wd] = self.value(x).dims4()?;
        let [cout, wcin, kh, kw] = self.value(w).dims4()?;
        if cin != wcin {
            return Err(Error::ShapeMismatch {
                op: "conv2d input channels",
                expected: vec![wcin],
                actual: vec![cin],
            });
        }
        if stride == 0 {
            return Err(invalid("conv2d", "stride must be at least 1"));
        }
        if h + 2 * padding < kh || wd + 2 * padding < kw {
            return Err(invalid(
                "conv2d",
                format!("kernel {kh}x{kw} larger than padded input {h}x{wd} (padding {padding})"),
            ));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [cout] {
                return Err(Error::ShapeMismatch {
                    op: "conv2d bias",
                    expected: vec![cout],
                    actual: self.value(b).shape().to_vec(),
                });
            }
        }
        let geom = ConvGeom {
            n,
            cin,
            h,
            w: wd,
            cout,
            kh,
            kw,
            stride,
            padding,
            ho: (h + 2 * padding - kh) / stride + 1,
            wo: (wd + 2 * padding - kw) / stride + 1,
        };
        let out = kernels::conv2d_forward(
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &geom,
        );
        let value = Tensor::new([n, cout, geom.ho, geom.wo], out)?;
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        Ok(self.push(value, Op::Conv2d { x, w, b, geom }, &inputs))
    }

    pub fn maxpool2x2(&mut self, x: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(x).dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(invalid(
                "maxpool2x2",
                format!("spatial size {h}x{w} is not even"),
            ));
        }
        let (out, argmax) = kernels::maxpool2x2_forward(self.value(x).data(), n * c, h, w);
        let value = Tensor::new([n, c, h / 2, w / 2], out)?;
        Ok(self.push(value, Op::MaxPool { x, argmax }, &[x]))
    }

    pub fn upsample_nearest2x(&mut self, x: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(x).dims4()?;
        let out = kernels::upsample2x_forward(self.value(x).data(), n * c, h, w);
        let value = Tensor::new([n, c, 2 * h, 2 * w], out)?;
        Ok(self.push(value, Op::Upsample { x }, &[x]))
    }

    fn bn_params(&self, x: Var, gamma: Var, beta: Var) -> Result<[usize; 4]> {
        let dims = self.value(x).dims4()?;
        for p in [gamma, beta] {
            if self.value(p).shape() != [dims[1]] {
                return Err(Error::ShapeMismatch {
                    op: "batchnorm affine",
                    expected: vec![dims[1]],
                    actual: self.value(p).shape().to_vec(),
                });
            }
        }
        Ok(dims)
    }

    /// Train-mode batch norm: normalizes each channel by its batch mean and variance.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats<T>)> {
        let [n, c, h, w] = self.bn_params(x, gamma, beta)?;
        if n * h * w < 2 {
            return Err(invalid(
                "batchnorm",
                "train mode needs at least two values per channel",
            ));
        }
        let (mean, var) = kernels::channel_moments(self.value(x).data(), n, c, h * w);
        let eps = T::of(eps);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (y, xhat) = kernels::batchnorm_apply(
            self.value(x).data(),
            n,
            c,
            h * w,
            &mean,
            &inv_std,
            self.value(gamma).data(),
            self.value(beta).data(),
        );
        let value = Tensor::new([n, c, h, w], y)?;
        let out = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: true,
            },
            &[x, gamma, beta],
        );
        Ok((
            out,
            BatchStats {
                mean,
                var,
                count: n * h * w,
            },
        ))
    }

    /// Eval-mode batch norm with fixed running statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        eps: f64,
    ) -> Result<Var> {
        let [n, c, h, w] = self.bn_params(x, gamma, beta)?;
        if running_mean.len() != c || running_var.len() != c {
            return Err(invalid(
                "batchnorm",
                "running statistics do not match channel count",
            ));
        }
        let eps = T::of(eps);
        let inv_std: Vec<T> = running_var
            .iter()
            .map(|&v| T::one() / (v + eps).sqrt())
            .collect();
        let (y, xhat) = kernels::batchnorm_apply(
            self.value(x).data(),
            n,
            c,
            h * w,
            running_mean,
            &inv_std,
            self.value(gamma).data(),
            self.value(beta).data(),
        );
        let value = Tensor::new([n, c, h, w], y)?;
        Ok(self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: false,
            },
            &[x, gamma, beta],
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self
            .value(x)
            .map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(value, Op::Relu { x }, &[x])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&p, &q)| p + q)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add { a, b }, &[a, b]))
    }

    /// Mean over all elements of the squared difference.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse_loss", pred, target)?;
        let n = T::of(self.value(pred).numel() as f64);
        let s: T = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum();
        Ok(self.push(
            Tensor::scalar(s / n),
            Op::Mse { pred, target },
            &[pred, target],
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum { x, weights: None }, &[x])
    }

    /// `Σ wᵢ·xᵢ` with fixed weights.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<T>) -> Result<Var> {
        if weights.len() != self.value(x).numel() {
            return Err(invalid(
                "weighted_sum",
                "weight count differs from element count",
            ));
        }
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(&weights)
            .map(|(&v, &w)| v * w)
            .sum();
        Ok(self.push(
            Tensor::scalar(s),
            Op::Sum {
                x,
                weights: Some(weights),
            },
            &[x],
        ))
    }

    /// Identity in the forward pass; blocks gradient flow.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad: false,
            op: Op::Detach,
        });
        Var(self.nodes.len() - 1)
    }

    /// Propagates d(loss)/d(node) to every `requires_grad` leaf. Leaf gradients
    /// accumulate across calls until [`Graph::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::NonScalarLoss(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                let node = &mut self.nodes[i];
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &d)| *a = *a + d),
                    None => node.grad = Some(g),
                }
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], v: Var, contribution: Vec<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc
                .iter_mut()
                .zip(&contribution)
                .for_each(|(a, &d)| *a = *a + d),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match &self.nodes[i].op {
            Op::Leaf | Op::Detach => {}
            Op::Conv2d { x, w, b, geom } => {
                let need = (
                    self.requires_grad(*x),
                    self.requires_grad(*w),
                    b.is_some_and(|b| self.requires_grad(b)),
                );
                let out = kernels::conv2d_backward(
                    self.value(*x).data(),
                    self.value(*w).data(),
                    g,
                    geom,
                    need,
                );
                if let Some(dx) = out.input {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = out.weight {
                    self.accumulate(grads, *w, dw);
                }
                if let (Some(b), Some(db)) = (b, out.bias) {
                    self.accumulate(grads, *b, db);
                }
            }
            Op::MaxPool { x, argmax } => {
                let mut dx = vec![T::zero(); self.value(*x).numel()];
                for (&a, &d) in argmax.iter().zip(g) {
                    dx[a as usize] = dx[a as usize] + d;
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Upsample { x } => {
                let [n, c, h, w] = self.value(*x).dims4().expect("recorded as 4-D");
                self.accumulate(grads, *x, kernels::upsample2x_backward(g, n * c, h, w));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let [n, c, h, w] = self.value(*x).dims4().expect("recorded as 4-D");
                let (dx, dgamma, dbeta) = kernels::batchnorm_backward(
                    g,
                    xhat,
                    n,
                    c,
                    h * w,
                    self.value(*gamma).data(),
                    inv_std,
                    *batch_stats,
                );
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gamma, dgamma);
                self.accumulate(grads, *beta, dbeta);
            }
            Op::Relu { x } => {
                let dx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &d)| if v > T::zero() { d } else { T::zero() })
                    .collect();
                self.accumulate(grads, *x, dx);
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Mse { pred, target } => {
                let n = T::of(self.value(*pred).numel() as f64);
                let scale = T::of(2.0) * g[0] / n;
                let diff: Vec<T> = self
                    .value(*pred)
                    .data()
                    .iter()
                    .zip(self.value(*target).data())
                    .map(|(&p, &t)| scale * (p - t))
                    .collect();
                if self.requires_grad(*target) {
                    self.accumulate(grads, *target, diff.iter().map(|&d| -d).collect());
                }
                self.accumulate(grads, *pred, diff);
            }
            Op::Sum { x, weights } => {
                let dx = match weights {
                    Some(w) => w.iter().map(|&w| w * g[0]).collect(),
                    None => vec![g[0]; self.value(*x).numel()],
                };
                self.accumulate(grads, *x, dx);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv_example_and_identity() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1, 2, 2], &[1., 2., 3., 4.]));
        let w = g.constant(t(&[1, 1, 2, 2], &[1., 0., 0., 1.]));
        let b = g.constant(t(&[1], &[0.]));
        let y = g.conv2d(x, w, Some(b), 1, 0).unwrap();
        assert_eq!(g.value(y).data(), &[5.0]);

        let one = g.constant(t(&[1, 1, 1, 1], &[1.]));
        let id = g.conv2d(x, one, None, 1, 0).unwrap();
        assert_eq!(g.value(id), g.value(x));
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros([1, 3, 4, 4]));
        let w = g.constant(Tensor::zeros([2, 2, 3, 3]));
        let err = g.conv2d(x, w, None, 1, 1).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn stem_conv_shape() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros([1, 3, 256, 256]));
        let w = g.constant(Tensor::zeros([64, 3, 7, 7]));
        let y = g.conv2d(x, w, None, 2, 3).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 64, 128, 128]);
    }

    #[test]
    fn pool_and_upsample_shapes() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros([1, 256, 64, 64]));
        let p = g.maxpool2x2(x).unwrap();
        assert_eq!(g.value(p).shape(), &[1, 256, 32, 32]);
        let s = g.constant(Tensor::zeros([1, 256, 4, 4]));
        let u = g.upsample_nearest2x(s).unwrap();
        assert_eq!(g.value(u).shape(), &[1, 256, 8, 8]);
        let odd = g.constant(Tensor::zeros([1, 1, 3, 4]));
        assert!(g.maxpool2x2(odd).is_err());
    }

    #[test]
    fn small_examples() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[-1., 2.]));
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0., 2.]);
        let a = g.constant(t(&[1, 2], &[1., 2.]));
        let b = g.constant(t(&[1, 2], &[3., 4.]));
        let s = g.add(a, b).unwrap();
        assert_eq!(g.value(s).data(), &[4., 6.]);
        let p = g.constant(t(&[2], &[1., 0.]));
        let z = g.constant(t(&[2], &[0., 0.]));
        let l = g.mse_loss(p, z).unwrap();
        assert_eq!(g.value(l).data(), &[0.5]);
        assert!(g.add(a, p).is_err());
        assert!(g.mse_loss(a, p).is_err());
    }

    #[test]
    fn backward_closed_forms() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], &[1., -2., 3.]), true);
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1., 1., 1.]);

        let mut g = Graph::new();
        let x = g.leaf(t(&[1], &[2.]), true);
        let z = g.constant(t(&[1], &[0.]));
        let l = g.mse_loss(x, z).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[4.]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[1., 2.]), true);
        assert!(matches!(g.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn backward_twice_doubles_leaf_grads() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 1, 2, 2], &[0.3, -0.7, 1.1, 0.2]), true);
        let w = g.leaf(t(&[2, 1, 1, 1], &[0.5, -1.5]), true);
        let y = g.conv2d(x, w, None, 1, 0).unwrap();
        let r = g.relu(y);
        let l = g.sum(r);
        g.backward(l).unwrap();
        let first: Vec<f64> = g.grad(x).unwrap().to_vec();
        let first_w: Vec<f64> = g.grad(w).unwrap().to_vec();
        g.backward(l).unwrap();
        for (a, b) in g.grad(x).unwrap().iter().zip(&first) {
            assert_eq!(*a, 2.0 * b);
        }
        for (a, b) in g.grad(w).unwrap().iter().zip(&first_w) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn batchnorm_train_normalizes() {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..2 * 3 * 4)
            .map(|i| ((i * 7 % 5) as f64) * 1.3 + i as f64)
            .collect();
        let x = g.constant(t(&[2, 3, 2, 2], &data));
        let gamma = g.constant(Tensor::full([3], 1.0));
        let beta = g.constant(Tensor::zeros([3]));
        let (y, _) = g.batchnorm_train(x, gamma, beta, 1e-5).unwrap();
        let (mean, var) = kernels::channel_moments(g.value(y).data(), 2, 3, 4);
        for c in 0..3 {
            assert!(mean[c].abs() < 1e-5);
            assert!((var[c] - 1.0).abs() < 1e-5);
        }
        let cst = g.constant(Tensor::full([2, 3, 2, 2], 4.2));
        let (z, _) = g.batchnorm_train(cst, gamma, beta, 1e-5).unwrap();
        assert!(g.value(z).data().iter().all(|&v| v == 0.0));
    }
}
