//! Center/scale cropping with optional rotation, scaling and mirroring.

use alloc::vec;

use num_traits::Float;

use crate::error::{invalid, Result};
use crate::geometry::Affine2;
use crate::image::RgbImage;
use crate::tensor::Tensor;

/// Crop window side in pixels per unit of annotation scale.
pub const PIXELS_PER_SCALE: f64 = 200.0;

/// Map from original-image coordinates to an `out_res`-pixel crop: a square window of
/// side `scale · 200` centered on `center`, rotated by `rotation_deg` about that center
/// and, if `mirror`, reflected about the crop's vertical midline.
pub fn crop_affine(
    center: [f64; 2],
    scale: f64,
    out_res: usize,
    rotation_deg: f64,
    mirror: bool,
) -> Result<Affine2> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(
            "crop",
            alloc::format!("scale {scale} must be positive"),
        ));
    }
    if out_res == 0 {
        return Err(invalid("crop", "output resolution must be positive"));
    }
    let out = out_res as f64;
    let k = out / (scale * PIXELS_PER_SCALE);
    let to_crop = Affine2::translation(out / 2.0, out / 2.0)
        .after(&Affine2::scaling(k, k))
        .after(&Affine2::rotation(-rotation_deg.to_radians()))
        .after(&Affine2::translation(-center[0], -center[1]));
    Ok(if mirror {
        Affine2([[-1.0, 0.0, out], [0.0, 1.0, 0.0]]).after(&to_crop)
    } else {
        to_crop
    })
}

/// Resamples `image` through `to_crop` into a 3×R×R tensor with values in [0, 1].
/// Samples are bilinear at pixel centers; everything outside the image is zero.
pub fn warp(image: &RgbImage, to_crop: &Affine2, out_res: usize) -> Result<Tensor<f32>> {
    if image.width == 0 || image.height == 0 {
        return Err(invalid("crop", "image is empty"));
    }
    let from_crop = to_crop
        .inverse()
        .ok_or_else(|| invalid("crop", "crop transform is singular"))?;
    let plane = out_res * out_res;
    let mut data = vec![0.0f32; 3 * plane];
    let (w, h) = (image.width as isize, image.height as isize);
    for v in 0..out_res {
        for u in 0..out_res {
            let [sx, sy] = from_crop.apply([u as f64 + 0.5, v as f64 + 0.5]);
            let (gx, gy) = (sx - 0.5, sy - 0.5);
            let (x0, y0) = (Float::floor(gx), Float::floor(gy));
            let (fx, fy) = (gx - x0, gy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let mut acc = [0.0f64; 3];
            for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                    let (x, y) = (x0 + dx, y0 + dy);
                    let weight = wx * wy;
                    if weight == 0.0 || x < 0 || y < 0 || x >= w || y >= h {
                        continue;
                    }
                    let px = image.pixel(x as usize, y as usize);
                    for c in 0..3 {
                        acc[c] += weight * f64::from(px[c]);
                    }
                }
            }
            for c in 0..3 {
                data[c * plane + v * out_res + u] = (acc[c] / 255.0) as f32;
            }
        }
    }
    Tensor::new([3, out_res, out_res], data)
}

/// Crops the person at `center`/`scale` and resizes to `out_res`. Returns the crop and
/// the original→crop map so predictions can be mapped back.
pub fn crop_and_resize(
    image: &RgbImage,
    center: [f64; 2],
    scale: f64,
    out_res: usize,
) -> Result<(Tensor<f32>, Affine2)> {
    let to_crop = crop_affine(center, scale, out_res, 0.0, false)?;
    Ok((warp(image, &to_crop, out_res)?, to_crop))
}
