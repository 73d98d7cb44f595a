//! 2-D affine maps on continuous pixel coordinates.
//!
//! Convention used throughout: pixel `i` covers `[i, i+1)` and its center is `i + 0.5`.

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// `p ↦ [a b; d e]·p + [c; f]`, stored row-major as `[[a, b, c], [d, e, f]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2(pub [[f64; 3]; 2]);

impl Affine2 {
    pub const IDENTITY: Self = Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self([[1.0, 0.0, tx], [0.0, 1.0, ty]])
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        Self([[sx, 0.0, 0.0], [0.0, sy, 0.0]])
    }

    /// Rotation by `radians` about the origin (counter-clockwise with y pointing up,
    /// clockwise on screen where y points down).
    pub fn rotation(radians: f64) -> Self {
        let (s, c) = Float::sin_cos(radians);
        Self([[c, -s, 0.0], [s, c, 0.0]])
    }

    pub fn apply(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
        ]
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn after(&self, first: &Self) -> Self {
        let (a, b) = (&self.0, &first.0);
        let mut out = [[0.0; 3]; 2];
        for r in 0..2 {
            out[r][0] = a[r][0] * b[0][0] + a[r][1] * b[1][0];
            out[r][1] = a[r][0] * b[0][1] + a[r][1] * b[1][1];
            out[r][2] = a[r][0] * b[0][2] + a[r][1] * b[1][2] + a[r][2];
        }
        Self(out)
    }

    pub fn determinant(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let [[a, b, c], [d, e, f]] = self.0;
        let ia = e / det;
        let ib = -b / det;
        let id = -d / det;
        let ie = a / det;
        Some(Self([
            [ia, ib, -(ia * c + ib * f)],
            [id, ie, -(id * c + ie * f)],
        ]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = Affine2::translation(3.0, -2.0)
            .after(&Affine2::rotation(0.4))
            .after(&Affine2::scaling(1.7, 1.7));
        let inv = m.inverse().unwrap();
        let p = [12.25, -4.5];
        let q = inv.apply(m.apply(p));
        assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
    }
}
