use crate::error::{invalid, Result};
use crate::geometry::Affine2;

/// Quarter-pixel-refined peak of one heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    /// Heatmap index coordinates: a peak on pixel (i, j) decodes to (i, j) before the
    /// offset. The continuous location is `position + 0.5`.
    pub position: [f64; 2],
    pub max_activation: f32,
    pub mean_activation: f32,
    /// Every value was equal; `position` is (0, 0).
    pub degenerate: bool,
}

/// Argmax (first in row-major order) plus a ±0.25 shift per axis toward the larger of
/// the two neighbors. No shift on equal neighbors or at a border.
pub fn decode(heatmap: &[f32], width: usize, height: usize) -> Result<Decoded> {
    if width == 0 || height == 0 || heatmap.len() != width * height {
        return Err(invalid(
            "decode",
            alloc::format!("{}x{} heatmap with {} values", width, height, heatmap.len()),
        ));
    }
    let (mut best, mut arg) = (heatmap[0], 0);
    let (mut lo, mut sum) = (heatmap[0], 0.0f64);
    for (i, &v) in heatmap.iter().enumerate() {
        if v > best {
            best = v;
            arg = i;
        }
        if v < lo {
            lo = v;
        }
        sum += f64::from(v);
    }
    let mean = (sum / heatmap.len() as f64) as f32;
    if lo == best {
        return Ok(Decoded {
            position: [0.0, 0.0],
            max_activation: best,
            mean_activation: mean,
            degenerate: true,
        });
    }
    let (x, y) = (arg % width, arg / width);
    let at = |x: usize, y: usize| heatmap[y * width + x];
    let shift = |before: Option<f32>, after: Option<f32>| match (before, after) {
        (Some(b), Some(a)) if a > b => 0.25,
        (Some(b), Some(a)) if a < b => -0.25,
        _ => 0.0,
    };
    let dx = shift(
        x.checked_sub(1).map(|l| at(l, y)),
        (x + 1 < width).then(|| at(x + 1, y)),
    );
    let dy = shift(
        y.checked_sub(1).map(|u| at(x, u)),
        (y + 1 < height).then(|| at(x, y + 1)),
    );
    Ok(Decoded {
        position: [x as f64 + dx, y as f64 + dy],
        max_activation: best,
        mean_activation: mean,
        degenerate: false,
    })
}

/// Plain argmax without refinement, in index coordinates.
pub fn argmax(heatmap: &[f32], width: usize) -> [f64; 2] {
    let mut arg = 0;
    for (i, &v) in heatmap.iter().enumerate() {
        if v > heatmap[arg] {
            arg = i;
        }
    }
    [(arg % width) as f64, (arg / width) as f64]
}

/// Maps decoded heatmap index coordinates to original-image pixels through the
/// network's input/output resolution ratio and the inverse crop transform.
pub fn heatmap_to_original(
    position: [f64; 2],
    input_res: usize,
    output_res: usize,
    to_crop: &Affine2,
) -> Result<[f64; 2]> {
    let from_crop = to_crop
        .inverse()
        .ok_or_else(|| invalid("heatmap_to_original", "crop transform is singular"))?;
    let k = input_res as f64 / output_res as f64;
    Ok(from_crop.apply([(position[0] + 0.5) * k, (position[1] + 0.5) * k]))
}
