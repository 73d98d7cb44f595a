use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub num_stacks: usize,
    pub num_features: usize,
    pub num_joints: usize,
    /// Number of pooling steps inside one hourglass.
    pub hourglass_depth: usize,
    /// Consecutive residual modules at every hourglass location.
    pub modules_per_location: usize,
    pub input_resolution: usize,
    pub output_resolution: usize,
}

impl Default for ModelConfig {
    /// Desk-scale configuration: 64 px input, 16 px heatmaps, two stacks of depth 2.
    fn default() -> Self {
        Self {
            num_stacks: 2,
            num_features: 64,
            num_joints: 14,
            hourglass_depth: 2,
            modules_per_location: 1,
            input_resolution: 64,
            output_resolution: 16,
        }
    }
}

impl ModelConfig {
    /// Full-size network: 256 px input, 64 px heatmaps, eight stacks of depth 4 with
    /// 256 features.
    pub fn paper(num_joints: usize) -> Self {
        Self {
            num_stacks: 8,
            num_features: 256,
            num_joints,
            hourglass_depth: 4,
            modules_per_location: 1,
            input_resolution: 256,
            output_resolution: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.num_stacks == 0
            || self.num_joints == 0
            || self.modules_per_location == 0
            || self.hourglass_depth == 0
        {
            return fail(format!(
                "stacks, joints, modules and depth must be positive: {self:?}"
            ));
        }
        if self.num_features < 4 || !self.num_features.is_multiple_of(4) {
            return fail(format!(
                "num_features {} must be a positive multiple of 4",
                self.num_features
            ));
        }
        if self.input_resolution == 0 || !self.input_resolution.is_multiple_of(4) {
            return fail(format!(
                "input_resolution {} must be divisible by 4",
                self.input_resolution
            ));
        }
        if self.output_resolution * 4 != self.input_resolution {
            return fail(format!(
                "output_resolution {} must be input_resolution / 4",
                self.output_resolution
            ));
        }
        if !self
            .output_resolution
            .is_multiple_of(1 << self.hourglass_depth)
        {
            return fail(format!(
                "output_resolution {} is not divisible by 2^{}",
                self.output_resolution, self.hourglass_depth
            ));
        }
        Ok(())
    }

    /// Resolution of the lowest hourglass level.
    pub fn innermost_resolution(&self) -> usize {
        self.output_resolution >> self.hourglass_depth
    }

    /// Channel counts of the stem: 7×7 conv output, first residual output, final.
    pub fn stem_channels(&self) -> (usize, usize, usize) {
        (
            self.num_features / 4,
            self.num_features / 2,
            self.num_features,
        )
    }

    /// Number of learnable scalars (weights, biases, batch-norm scale and shift).
    pub fn parameter_count(&self) -> usize {
        let f = self.num_features;
        let k = self.num_joints;
        let m = self.modules_per_location;
        let (c1, c2, _) = self.stem_channels();
        let stem = conv_count(3, c1, 7)
            + 2 * c1
            + residual_count(c1, c2)
            + residual_count(c2, c2)
            + residual_count(c2, f);
        let residuals_per_stack = m * (3 * self.hourglass_depth + 1) + m;
        let per_stack = residuals_per_stack * residual_count(f, f)
            + conv_count(f, f, 1)
            + 2 * f
            + conv_count(f, k, 1);
        let remap = conv_count(f, f, 1) + conv_count(k, f, 1);
        stem + self.num_stacks * per_stack + (self.num_stacks - 1) * remap
    }
}

pub(crate) fn conv_count(cin: usize, cout: usize, k: usize) -> usize {
    cout * cin * k * k + cout
}

pub(crate) fn residual_count(cin: usize, cout: usize) -> usize {
    let mid = cout / 2;
    let skip = if cin != cout {
        conv_count(cin, cout, 1)
    } else {
        0
    };
    2 * cin
        + conv_count(cin, mid, 1)
        + 2 * mid
        + conv_count(mid, mid, 3)
        + 2 * mid
        + conv_count(mid, cout, 1)
        + skip
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_config_reaches_four_by_four() {
        let c = ModelConfig::paper(16);
        c.validate().unwrap();
        assert_eq!(c.innermost_resolution(), 4);
    }

    #[test]
    fn rejects_bad_resolutions() {
        let c = ModelConfig {
            output_resolution: 32,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            hourglass_depth: 5,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            num_stacks: 0,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn equal_parameter_rearrangements() {
        let base = ModelConfig::paper(16);
        let count = |stacks, modules| {
            ModelConfig {
                num_stacks: stacks,
                modules_per_location: modules,
                ..base.clone()
            }
            .parameter_count() as f64
        };
        let reference = count(8, 1);
        for (s, m) in [(4, 2), (2, 4)] {
            assert!((count(s, m) - reference).abs() / reference < 0.05);
        }
    }
}
