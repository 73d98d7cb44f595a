//! Slice-level forward/backward kernels used by the graph.
//!
//! Convolution is cross-correlation (no kernel flip) lowered to a single gemm over the
//! whole batch: `cols` is `(cin·kh·kw) × (n·ho·wo)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0
    }

    /// Range of output columns whose input column `ox*stride + k - padding` is in bounds.
    fn valid_range(&self, k: usize, extent: usize, out: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let off = k as isize - self.padding as isize;
        // smallest o with o*s + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        // largest o with o*s + off <= extent-1
        let hi_num = extent as isize - 1 - off;
        let hi = if hi_num < 0 { -1 } else { hi_num / s };
        let lo = lo.max(0) as usize;
        let hi = (hi + 1).clamp(0, out as isize) as usize;
        (lo.min(hi), hi)
    }
}

fn im2col<T: Real>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let np = g.n * g.out_plane();
    let mut cols = vec![T::zero(); g.patch() * np];
    for c in 0..g.cin {
        for ky in 0..g.kh {
            let (oy_lo, oy_hi) = g.valid_range(ky, g.h, g.ho);
            for kx in 0..g.kw {
                let (ox_lo, ox_hi) = g.valid_range(kx, g.w, g.wo);
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst_row = &mut cols[row * np..(row + 1) * np];
                for b in 0..g.n {
                    let src = &x[(b * g.cin + c) * g.h * g.w..][..g.h * g.w];
                    let dst = &mut dst_row[b * g.out_plane()..][..g.out_plane()];
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky - g.padding;
                        let src_row = &src[iy * g.w..][..g.w];
                        let dst_line = &mut dst[oy * g.wo..][..g.wo];
                        if g.stride == 1 {
                            let ix0 = ox_lo + kx - g.padding;
                            dst_line[ox_lo..ox_hi]
                                .copy_from_slice(&src_row[ix0..ix0 + (ox_hi - ox_lo)]);
                        } else {
                            for ox in ox_lo..ox_hi {
                                dst_line[ox] = src_row[ox * g.stride + kx - g.padding];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let np = g.n * g.out_plane();
    for c in 0..g.cin {
        for ky in 0..g.kh {
            let (oy_lo, oy_hi) = g.valid_range(ky, g.h, g.ho);
            for kx in 0..g.kw {
                let (ox_lo, ox_hi) = g.valid_range(kx, g.w, g.wo);
                let row = (c * g.kh + ky) * g.kw + kx;
                let src_row = &cols[row * np..(row + 1) * np];
                for b in 0..g.n {
                    let dst = &mut dx[(b * g.cin + c) * g.h * g.w..][..g.h * g.w];
                    let src = &src_row[b * g.out_plane()..][..g.out_plane()];
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky - g.padding;
                        let line = &src[oy * g.wo..][..g.wo];
                        let dst_row = &mut dst[iy * g.w..][..g.w];
                        for ox in ox_lo..ox_hi {
                            dst_row[ox * g.stride + kx - g.padding] =
                                dst_row[ox * g.stride + kx - g.padding] + line[ox];
                        }
                    }
                }
            }
        }
    }
}

/// `[n, c, p]` → `[c, n·p]`.
fn batch_to_channel_major<T: Real>(x: &[T], n: usize, c: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            out[ch * n * p + b * p..][..p].copy_from_slice(&x[(b * c + ch) * p..][..p]);
        }
    }
    out
}

/// `[c, n·p]` → `[n, c, p]`.
fn channel_to_batch_major<T: Real>(x: &[T], n: usize, c: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            out[(b * c + ch) * p..][..p].copy_from_slice(&x[ch * n * p + b * p..][..p]);
        }
    }
    out
}

pub fn conv2d_forward<T: Real>(x: &[T], weight: &[T], bias: Option<&[T]>, g: &ConvGeom) -> Vec<T> {
    let p = g.out_plane();
    let np = g.n * p;
    let cols_owned;
    let cols: &[T] = if g.pointwise() {
        if g.n == 1 {
            x
        } else {
            cols_owned = batch_to_channel_major(x, g.n, g.cin, p);
            &cols_owned
        }
    } else {
        cols_owned = im2col(x, g);
        &cols_owned
    };
    let mut out = vec![T::zero(); g.cout * np];
    T::gemm(
        g.cout,
        g.patch(),
        np,
        T::one(),
        weight,
        (g.patch(), 1),
        cols,
        (np, 1),
        T::zero(),
        &mut out,
        (np, 1),
    );
    if let Some(bias) = bias {
        for (row, &b) in out.chunks_mut(np).zip(bias) {
            row.iter_mut().for_each(|v| *v = *v + b);
        }
    }
    if g.n == 1 {
        out
    } else {
        channel_to_batch_major(&out, g.n, g.cout, p)
    }
}

pub struct ConvGrads<T> {
    pub input: Option<Vec<T>>,
    pub weight: Option<Vec<T>>,
    pub bias: Option<Vec<T>>,
}

pub fn conv2d_backward<T: Real>(
    x: &[T],
    weight: &[T],
    dy: &[T],
    g: &ConvGeom,
    need: (bool, bool, bool),
) -> ConvGrads<T> {
    let p = g.out_plane();
    let np = g.n * p;
    let dc_owned;
    let dc: &[T] = if g.n == 1 {
        dy
    } else {
        dc_owned = batch_to_channel_major(dy, g.n, g.cout, p);
        &dc_owned
    };
    let bias = need
        .2
        .then(|| dc.chunks(np).map(|row| row.iter().copied().sum()).collect());
    let weight_grad = need.1.then(|| {
        let cols_owned;
        let cols: &[T] = if g.pointwise() {
            if g.n == 1 {
                x
            } else {
                cols_owned = batch_to_channel_major(x, g.n, g.cin, p);
                &cols_owned
            }
        } else {
            cols_owned = im2col(x, g);
            &cols_owned
        };
        let mut dw = vec![T::zero(); g.cout * g.patch()];
        T::gemm(
            g.cout,
            np,
            g.patch(),
            T::one(),
            dc,
            (np, 1),
            cols,
            (1, np),
            T::zero(),
            &mut dw,
            (g.patch(), 1),
        );
        dw
    });
    let input = need.0.then(|| {
        let mut dcols = vec![T::zero(); g.patch() * np];
        T::gemm(
            g.patch(),
            g.cout,
            np,
            T::one(),
            weight,
            (1, g.patch()),
            dc,
            (np, 1),
            T::zero(),
            &mut dcols,
            (np, 1),
        );
        if g.pointwise() {
            if g.n == 1 {
                dcols
            } else {
                channel_to_batch_major(&dcols, g.n, g.cin, p)
            }
        } else {
            let mut dx = vec![T::zero(); x.len()];
            col2im(&dcols, g, &mut dx);
            dx
        }
    });
    ConvGrads {
        input,
        weight: weight_grad,
        bias,
    }
}

/// 2×2 stride-2 max pooling. Returns outputs and, per output, the flat input index of
/// the first maximal element in row-major window order.
pub fn maxpool2x2_forward<T: Real>(
    x: &[T],
    planes: usize,
    h: usize,
    w: usize,
) -> (Vec<T>, Vec<u32>) {
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * ho * wo);
    let mut arg = Vec::with_capacity(planes * ho * wo);
    for pl in 0..planes {
        let base = pl * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let i0 = base + 2 * oy * w + 2 * ox;
                let mut best = i0;
                for idx in [i0 + 1, i0 + w, i0 + w + 1] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

pub fn upsample2x_forward<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let w2 = 2 * w;
    let mut out = vec![T::zero(); planes * 4 * h * w];
    for pl in 0..planes {
        let src = &x[pl * h * w..][..h * w];
        let dst = &mut out[pl * 4 * h * w..][..4 * h * w];
        for y in 0..h {
            let (top, rest) = dst[2 * y * w2..].split_at_mut(w2);
            for xx in 0..w {
                let v = src[y * w + xx];
                top[2 * xx] = v;
                top[2 * xx + 1] = v;
            }
            rest[..w2].copy_from_slice(top);
        }
    }
    out
}

pub fn upsample2x_backward<T: Real>(dy: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let w2 = 2 * w;
    let mut dx = vec![T::zero(); planes * h * w];
    for pl in 0..planes {
        let src = &dy[pl * 4 * h * w..][..4 * h * w];
        for y in 0..h {
            for xx in 0..w {
                let r0 = 2 * y * w2 + 2 * xx;
                let r1 = r0 + w2;
                dx[pl * h * w + y * w + xx] = (src[r0] + src[r0 + 1]) + (src[r1] + src[r1 + 1]);
            }
        }
    }
    dx
}

/// Per-channel statistics over the N, H, W axes: (mean, biased variance).
pub fn channel_moments<T: Real>(x: &[T], n: usize, c: usize, plane: usize) -> (Vec<T>, Vec<T>) {
    let count = T::of((n * plane) as f64);
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    for ch in 0..c {
        let mut s = T::zero();
        for b in 0..n {
            s = s + x[(b * c + ch) * plane..][..plane]
                .iter()
                .copied()
                .sum::<T>();
        }
        let m = s / count;
        let mut q = T::zero();
        for b in 0..n {
            q = q + x[(b * c + ch) * plane..][..plane]
                .iter()
                .map(|&v| (v - m) * (v - m))
                .sum::<T>();
        }
        mean[ch] = m;
        var[ch] = q / count;
    }
    (mean, var)
}

/// Applies `gamma·(x−mean)·inv_std + beta`; returns (y, xhat).
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_apply<T: Real>(
    x: &[T],
    n: usize,
    c: usize,
    plane: usize,
    mean: &[T],
    inv_std: &[T],
    gamma: &[T],
    beta: &[T],
) -> (Vec<T>, Vec<T>) {
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            for i in off..off + plane {
                let h = (x[i] - mean[ch]) * inv_std[ch];
                xhat[i] = h;
                y[i] = gamma[ch] * h + beta[ch];
            }
        }
    }
    (y, xhat)
}

/// Gradients for gamma and beta plus, for the input, either the batch-statistics
/// adjoint (train mode) or the fixed affine adjoint (eval mode).
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_backward<T: Real>(
    dy: &[T],
    xhat: &[T],
    n: usize,
    c: usize,
    plane: usize,
    gamma: &[T],
    inv_std: &[T],
    batch_stats: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let m = T::of((n * plane) as f64);
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            for i in off..off + plane {
                dgamma[ch] = dgamma[ch] + dy[i] * xhat[i];
                dbeta[ch] = dbeta[ch] + dy[i];
            }
        }
    }
    let mut dx = vec![T::zero(); dy.len()];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            let k = gamma[ch] * inv_std[ch];
            for i in off..off + plane {
                dx[i] = if batch_stats {
                    k * (dy[i] - (dbeta[ch] + xhat[i] * dgamma[ch]) / m)
                } else {
                    k * dy[i]
                };
            }
        }
    }
    (dx, dgamma, dbeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::too_many_arguments)]
    fn geom(
        n: usize,
        cin: usize,
        h: usize,
        w: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> ConvGeom {
        let ho = (h + 2 * padding - k) / stride + 1;
        let wo = (w + 2 * padding - k) / stride + 1;
        ConvGeom {
            n,
            cin,
            h,
            w,
            cout,
            kh: k,
            kw: k,
            stride,
            padding,
            ho,
            wo,
        }
    }

    /// Direct evaluation of the cross-correlation sum.
    fn naive_conv(x: &[f64], wt: &[f64], b: &[f64], g: &ConvGeom) -> Vec<f64> {
        let mut out = vec![0.0; g.n * g.cout * g.ho * g.wo];
        for n in 0..g.n {
            for co in 0..g.cout {
                for oy in 0..g.ho {
                    for ox in 0..g.wo {
                        let mut s = b[co];
                        for ci in 0..g.cin {
                            for ky in 0..g.kh {
                                for kx in 0..g.kw {
                                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                                    let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                                    if iy >= 0
                                        && ix >= 0
                                        && (iy as usize) < g.h
                                        && (ix as usize) < g.w
                                    {
                                        s += x[((n * g.cin + ci) * g.h + iy as usize) * g.w
                                            + ix as usize]
                                            * wt[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                                    }
                                }
                            }
                        }
                        out[((n * g.cout + co) * g.ho + oy) * g.wo + ox] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn gemm_conv_matches_direct_sum() {
        for &(n, cin, h, cout, k, s, p) in &[
            (1, 1, 2, 1, 2, 1, 0),
            (2, 3, 7, 4, 3, 1, 1),
            (2, 2, 9, 3, 7, 2, 3),
            (3, 4, 5, 2, 1, 1, 0),
            (1, 2, 6, 2, 3, 2, 1),
        ] {
            let g = geom(n, cin, h, h, cout, k, s, p);
            let x: Vec<f64> = (0..n * cin * h * h)
                .map(|i| ((i * 37 % 11) as f64) - 5.0)
                .collect();
            let wt: Vec<f64> = (0..cout * cin * k * k)
                .map(|i| ((i * 13 % 7) as f64) * 0.5 - 1.0)
                .collect();
            let b: Vec<f64> = (0..cout).map(|i| i as f64).collect();
            assert_eq!(
                conv2d_forward(&x, &wt, Some(&b), &g),
                naive_conv(&x, &wt, &b, &g)
            );
        }
    }

    #[test]
    fn two_by_two_example() {
        let g = geom(1, 1, 2, 2, 1, 2, 1, 0);
        let y = conv2d_forward(
            &[1.0f64, 2.0, 3.0, 4.0],
            &[1.0, 0.0, 0.0, 1.0],
            Some(&[0.0]),
            &g,
        );
        assert_eq!(y, vec![5.0]);
    }

    #[test]
    fn maxpool_ties_route_to_first() {
        let (y, arg) = maxpool2x2_forward(&[3.0f32, 3.0, 3.0, 3.0], 1, 2, 2);
        assert_eq!(y, vec![3.0]);
        assert_eq!(arg, vec![0]);
    }

    #[test]
    fn upsample_replicates() {
        let y = upsample2x_forward(&[1.0f32, 2.0, 3.0, 4.0], 1, 2, 2);
        assert_eq!(
            y,
            vec![1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
        );
        assert_eq!(upsample2x_backward(&[1.0f32; 16], 1, 2, 2), vec![4.0; 4]);
    }
}
