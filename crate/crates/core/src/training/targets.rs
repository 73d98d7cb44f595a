use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{invalid, Result};
use crate::tensor::Tensor;

/// Per-joint 2-D Gaussian targets.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSet {
    /// K×R×R.
    pub values: Tensor<f32>,
    /// The joint was present but its location fell outside the map.
    pub outside: Vec<bool>,
}

/// Renders unnormalized Gaussians `exp(-d²/2σ²)` sampled at pixel centers, one channel
/// per joint. `joints` are in heatmap pixel coordinates. Absent joints and joints
/// outside the map get an all-zero channel.
pub fn render_targets(
    joints: &[[f64; 2]],
    present: &[bool],
    resolution: usize,
    sigma: f64,
) -> Result<HeatmapSet> {
    if joints.len() != present.len() {
        return Err(invalid(
            "render_targets",
            "joints and present flags differ in length",
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(
            "render_targets",
            alloc::format!("sigma {sigma} must be positive"),
        ));
    }
    if resolution == 0 {
        return Err(invalid("render_targets", "resolution must be positive"));
    }
    let plane = resolution * resolution;
    let res = resolution as f64;
    let mut values = vec![0.0f32; joints.len() * plane];
    let mut outside = vec![false; joints.len()];
    let inv = 1.0 / (2.0 * sigma * sigma);
    // Beyond this distance exp(-d²/2σ²) underflows f32.
    let reach = (sigma * 14.0).ceil() as isize;
    for (k, (&[x, y], &p)) in joints.iter().zip(present).enumerate() {
        if !p {
            continue;
        }
        if !(x >= 0.0 && x < res && y >= 0.0 && y < res) {
            outside[k] = true;
            continue;
        }
        let channel = &mut values[k * plane..(k + 1) * plane];
        let (cx, cy) = (x as isize, y as isize);
        let r = resolution as isize;
        let (x0, x1) = ((cx - reach).max(0), (cx + reach + 1).min(r));
        let (y0, y1) = ((cy - reach).max(0), (cy + reach + 1).min(r));
        let gx: Vec<f64> = (x0..x1)
            .map(|i| {
                let d = i as f64 + 0.5 - x;
                Float::exp(-d * d * inv)
            })
            .collect();
        for j in y0..y1 {
            let d = j as f64 + 0.5 - y;
            let gy = Float::exp(-d * d * inv);
            let row = &mut channel[j as usize * resolution..];
            for (i, g) in (x0..x1).zip(&gx) {
                row[i as usize] = (g * gy) as f32;
            }
        }
    }
    Ok(HeatmapSet {
        values: Tensor::new([joints.len(), resolution, resolution], values)?,
        outside,
    })
}
