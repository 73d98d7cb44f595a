//! RMSProp: `s ← α·s + (1−α)·g²`, `θ ← θ − lr·g / (√s + ε)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 2.5e-4,
            alpha: 0.99,
            eps: 1e-8,
        }
    }
}

/// Updates one tensor in place. Returns `false` (and leaves both buffers untouched) if
/// the gradient contains a non-finite value.
pub fn rmsprop_update<T: Real>(
    param: &mut [T],
    grad: &[T],
    square_avg: &mut [T],
    cfg: &RmsPropConfig,
) -> Result<bool> {
    if param.len() != grad.len() || param.len() != square_avg.len() {
        return Err(invalid(
            "rmsprop",
            "parameter, gradient and state lengths differ",
        ));
    }
    if cfg.lr <= 0.0 {
        return Err(invalid("rmsprop", "learning rate must be positive"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Ok(false);
    }
    let (lr, alpha, eps) = (T::of(cfg.lr), T::of(cfg.alpha), T::of(cfg.eps));
    let keep = T::one() - alpha;
    for ((p, &g), s) in param.iter_mut().zip(grad).zip(square_avg.iter_mut()) {
        *s = alpha * *s + keep * g * g;
        *p = *p - lr * g / (s.sqrt() + eps);
    }
    Ok(true)
}

/// Per-tensor squared-gradient averages for a list of parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmsPropState<T> {
    pub square_avg: Vec<Vec<T>>,
}

impl<T: Real> RmsPropState<T> {
    pub fn zeros_like(sizes: impl IntoIterator<Item = usize>) -> Self {
        Self {
            square_avg: sizes.into_iter().map(|n| vec![T::zero(); n]).collect(),
        }
    }
}

/// Applies one step to every `(param, grad)` pair; `None` grads are left alone.
/// Returns the indices of tensors skipped for non-finite gradients.
pub fn rmsprop_step<T: Real>(
    params: &mut [&mut [T]],
    grads: &[Option<&[T]>],
    state: &mut RmsPropState<T>,
    cfg: &RmsPropConfig,
) -> Result<Vec<usize>> {
    if params.len() != grads.len() || params.len() != state.square_avg.len() {
        return Err(invalid(
            "rmsprop",
            "parameter, gradient and state lists differ in length",
        ));
    }
    let mut skipped = Vec::new();
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let Some(g) = g else { continue };
        if !rmsprop_update(p, g, &mut state.square_avg[i], cfg)? {
            log::warn!("rmsprop: skipped update of tensor {i}, gradient is not finite");
            skipped.push(i);
        }
    }
    Ok(skipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = [1.0f64, -2.0];
        let mut s = [0.0; 2];
        rmsprop_update(&mut p, &[0.0, 0.0], &mut s, &RmsPropConfig::default()).unwrap();
        assert_eq!(p, [1.0, -2.0]);
    }

    #[test]
    fn single_step_by_hand() {
        let mut p = [0.0f64];
        let mut s = [0.0];
        let cfg = RmsPropConfig {
            lr: 0.1,
            alpha: 0.9,
            eps: 0.0,
        };
        rmsprop_update(&mut p, &[1.0], &mut s, &cfg).unwrap();
        assert!((s[0] - 0.1).abs() < 1e-15);
        assert!((p[0] + 0.316_227_766_016_838).abs() < 1e-12);
    }

    #[test]
    fn repeated_calls_are_reproducible() {
        let run = || {
            let mut p = [0.3f32, -0.1];
            let mut s = [0.0f32; 2];
            for _ in 0..2 {
                rmsprop_update(&mut p, &[0.5, -0.25], &mut s, &RmsPropConfig::default()).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_skips_tensor() {
        let mut a = [1.0f32];
        let mut b = [1.0f32];
        let mut state = RmsPropState::zeros_like([1, 1]);
        let skipped = rmsprop_step(
            &mut [&mut a[..], &mut b[..]],
            &[Some(&[f32::NAN][..]), Some(&[1.0][..])],
            &mut state,
            &RmsPropConfig::default(),
        )
        .unwrap();
        assert_eq!(skipped, [0]);
        assert_eq!(a, [1.0]);
        assert_ne!(b, [1.0]);
        assert_eq!(state.square_avg[0], [0.0]);
    }
}
