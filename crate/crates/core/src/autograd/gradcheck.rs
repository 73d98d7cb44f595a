//! Central finite-difference verification of analytic gradients.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// How the op's output is reduced to the scalar whose gradient is checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Plain sum of all outputs.
    Sum,
    /// Sum weighted by fixed pseudo-random factors in [0.5, 1.5). Avoids the
    /// degenerate all-zero gradients of e.g. `sum(batchnorm(x))`.
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error, so exact zeros compare absolutely.
    pub magnitude_floor: f64,
    /// Probe at most this many evenly spaced elements per input.
    pub max_probes_per_input: Option<usize>,
    pub projection: Projection,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            magnitude_floor: 1e-3,
            max_probes_per_input: None,
            projection: Projection::Random(0x5eed),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputReport {
    pub max_rel_error: f64,
    pub probes: usize,
    /// Probes whose ±step perturbation changed a relu sign or pooling winner.
    pub skipped_kinks: usize,
    /// Probes with a non-finite perturbed output.
    pub non_finite: usize,
    /// Flat indices of elements over tolerance.
    pub failures: Vec<usize>,
}

impl InputReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.non_finite == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub inputs: Vec<InputReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.inputs.iter().all(InputReport::passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.inputs
            .iter()
            .map(|r| r.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn probes(&self) -> usize {
        self.inputs.iter().map(|r| r.probes).sum()
    }
}

struct Evaluation {
    value: f64,
    signature: u64,
    grads: Vec<Vec<f64>>,
}

fn evaluate<F>(
    f: &F,
    inputs: &[Tensor<f64>],
    projection: Projection,
    with_grads: bool,
) -> Result<Evaluation>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| g.leaf(t.clone(), with_grads))
        .collect();
    let out = f(&mut g, &vars)?;
    let loss = match projection {
        Projection::Sum => g.sum(out),
        Projection::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = g.value(out).numel();
            let weights = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            g.weighted_sum(out, weights)?
        }
    };
    let value = g.value(loss).data()[0];
    let signature = g.activation_signature();
    let mut grads = Vec::new();
    if with_grads {
        g.backward(loss)?;
        grads = vars
            .iter()
            .zip(inputs)
            .map(|(&v, t)| {
                g.grad(v)
                    .map_or_else(|| alloc::vec![0.0; t.numel()], <[f64]>::to_vec)
            })
            .collect();
    }
    Ok(Evaluation {
        value,
        signature,
        grads,
    })
}

/// Compares the analytic gradient of `f` against `(f(x+h) − f(x−h)) / 2h` for every
/// element (or an evenly spaced subset) of every input.
pub fn finite_difference_check<F>(
    f: F,
    inputs: &[Tensor<f64>],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let base = evaluate(&f, inputs, cfg.projection, true)?;
    let mut report = GradCheckReport::default();
    let mut probe_inputs: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let mut r = InputReport::default();
        let numel = input.numel();
        let stride = match cfg.max_probes_per_input {
            Some(max) if max > 0 && numel > max => numel.div_ceil(max),
            _ => 1,
        };
        for e in (0..numel).step_by(stride) {
            let x0 = input.data()[e];
            probe_inputs[i].data_mut()[e] = x0 + cfg.step;
            let plus = evaluate(&f, &probe_inputs, cfg.projection, false)?;
            probe_inputs[i].data_mut()[e] = x0 - cfg.step;
            let minus = evaluate(&f, &probe_inputs, cfg.projection, false)?;
            probe_inputs[i].data_mut()[e] = x0;
            r.probes += 1;
            if !plus.value.is_finite() || !minus.value.is_finite() {
                r.non_finite += 1;
                continue;
            }
            if plus.signature != base.signature || minus.signature != base.signature {
                r.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus.value - minus.value) / (2.0 * cfg.step);
            let analytic = base.grads[i][e];
            let denom = analytic.abs().max(numeric.abs()).max(cfg.magnitude_floor);
            let rel = (analytic - numeric).abs() / denom;
            if rel.is_nan() || rel > cfg.tolerance {
                r.failures.push(e);
            }
            if rel.is_finite() {
                r.max_rel_error = r.max_rel_error.max(rel);
            } else {
                r.max_rel_error = f64::INFINITY;
            }
        }
        report.inputs.push(r);
    }
    Ok(report)
}
