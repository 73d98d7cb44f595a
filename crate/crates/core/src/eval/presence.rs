use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// One operating point: statistics `>= threshold` are predicted present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresenceCurve {
    /// Ordered by decreasing threshold, one point per distinct statistic value.
    pub points: Vec<PrPoint>,
    /// `None` when only one class occurs.
    pub auc: Option<f64>,
}

/// Precision/recall of predicting `present` by thresholding `stats`, swept over every
/// distinct statistic value (ties share a point). The area is the trapezoidal
/// integral over recall of the curve extended to recall 0 at the first precision.
pub fn presence_pr(stats: &[f64], present: &[bool]) -> Result<PresenceCurve> {
    if stats.len() != present.len() {
        return Err(invalid(
            "presence_pr",
            "statistics and labels differ in length",
        ));
    }
    if stats.iter().any(|s| s.is_nan()) {
        return Err(invalid("presence_pr", "statistic is NaN"));
    }
    let positives = present.iter().filter(|&&p| p).count();
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| stats[b].total_cmp(&stats[a]));
    let mut points = Vec::new();
    let mut tps = Vec::new();
    let (mut tp, mut taken) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = stats[order[i]];
        while i < order.len() && stats[order[i]] == t {
            tp += usize::from(present[order[i]]);
            taken += 1;
            i += 1;
        }
        tps.push(tp);
        points.push(PrPoint {
            threshold: t,
            precision: tp as f64 / taken as f64,
            recall: if positives > 0 {
                tp as f64 / positives as f64
            } else {
                0.0
            },
        });
    }
    let auc = (positives > 0 && positives < stats.len()).then(|| {
        // Accumulated in units of true positives, normalized once.
        let mut area = 0.0;
        let (mut tp0, mut p0) = (0usize, points[0].precision);
        for (pt, &tp) in points.iter().zip(&tps) {
            area += (tp - tp0) as f64 * (pt.precision + p0) / 2.0;
            tp0 = tp;
            p0 = pt.precision;
        }
        area / positives as f64
    });
    Ok(PresenceCurve { points, auc })
}
