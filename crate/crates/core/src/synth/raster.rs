//! Anti-aliased drawing into a floating-point RGB canvas.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::image::RgbImage;

pub(crate) struct Canvas {
    pub size: usize,
    pub rgb: Vec<[f32; 3]>,
}

impl Canvas {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            rgb: vec![[0.0; 3]; size * size],
        }
    }

    fn blend(&mut self, x: usize, y: usize, color: [f32; 3], alpha: f32) {
        let px = &mut self.rgb[y * self.size + x];
        for c in 0..3 {
            px[c] += alpha * (color[c] - px[c]);
        }
    }

    /// Clamped pixel index range covering `[lo, hi]`.
    fn span(&self, lo: f64, hi: f64) -> (usize, usize) {
        let a = Float::floor(lo).max(0.0) as usize;
        let b = (Float::ceil(hi).max(0.0) as usize).min(self.size);
        (a, b)
    }

    /// Segment `a–b` thickened by `radius`, with one pixel of coverage ramp.
    pub fn capsule(&mut self, a: [f64; 2], b: [f64; 2], radius: f64, color: [u8; 3]) {
        let color = to_f32(color);
        let reach = radius + 1.0;
        let (x0, x1) = self.span(a[0].min(b[0]) - reach, a[0].max(b[0]) + reach);
        let (y0, y1) = self.span(a[1].min(b[1]) - reach, a[1].max(b[1]) + reach);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64 + 0.5 - a[0], y as f64 + 0.5 - a[1]);
                let t = if len2 > 0.0 {
                    ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (ex, ey) = (px - t * dx, py - t * dy);
                let d = Float::sqrt(ex * ex + ey * ey);
                let cover = (radius + 0.5 - d).clamp(0.0, 1.0);
                if cover > 0.0 {
                    self.blend(x, y, color, cover as f32);
                }
            }
        }
    }

    pub fn disk(&mut self, c: [f64; 2], radius: f64, color: [u8; 3]) {
        self.capsule(c, c, radius, color);
    }

    /// Axis-aligned opaque rectangle over pixel range `[x0,x1)×[y0,y1)`, with speckle.
    pub fn rect<R: Rng + ?Sized>(
        &mut self,
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        color: [u8; 3],
        rng: &mut R,
    ) {
        let base = to_f32(color);
        for y in y0.min(self.size)..y1.min(self.size) {
            for x in x0.min(self.size)..x1.min(self.size) {
                let n: f32 = rng.random_range(-0.06..0.06);
                self.rgb[y * self.size + x] = base.map(|c| (c + n).clamp(0.0, 1.0));
            }
        }
    }

    /// Two-octave bilinear value noise mixing two colors.
    pub fn value_noise<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        cell: usize,
        a: [u8; 3],
        b: [u8; 3],
    ) {
        let (a, b) = (to_f32(a), to_f32(b));
        let mut field = vec![0.0f32; self.size * self.size];
        for (octave, weight) in [(cell.max(2), 0.65f32), ((cell / 2).max(2), 0.35)] {
            let g = self.size / octave + 2;
            let lattice: Vec<f32> = (0..g * g).map(|_| rng.random::<f32>()).collect();
            for y in 0..self.size {
                for x in 0..self.size {
                    let fx = (x as f32 + 0.5) / octave as f32;
                    let fy = (y as f32 + 0.5) / octave as f32;
                    let (ix, iy) = (fx as usize, fy as usize);
                    let (tx, ty) = (fx - ix as f32, fy - iy as f32);
                    let l = |i: usize, j: usize| lattice[j * g + i];
                    let top = l(ix, iy) * (1.0 - tx) + l(ix + 1, iy) * tx;
                    let bot = l(ix, iy + 1) * (1.0 - tx) + l(ix + 1, iy + 1) * tx;
                    field[y * self.size + x] += weight * (top * (1.0 - ty) + bot * ty);
                }
            }
        }
        for (px, &t) in self.rgb.iter_mut().zip(&field) {
            for c in 0..3 {
                px[c] = a[c] + t * (b[c] - a[c]);
            }
        }
    }

    pub fn into_image(self) -> RgbImage {
        let mut data = Vec::with_capacity(self.rgb.len() * 3);
        for px in &self.rgb {
            for &c in px {
                data.push(Float::round(c.clamp(0.0, 1.0) * 255.0) as u8);
            }
        }
        RgbImage::from_raw(self.size, self.size, data).expect("canvas dimensions are consistent")
    }
}

fn to_f32(c: [u8; 3]) -> [f32; 3] {
    c.map(|v| f32::from(v) / 255.0)
}
