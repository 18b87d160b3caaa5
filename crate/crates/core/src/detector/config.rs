use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, DEFAULT_LEAKY_SLOPE};

pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.25;
pub const DEFAULT_NMS_THRESHOLD: f64 = 0.45;

/// Architecture and post-processing settings of the grid detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Cells per side of the S×S grid.
    pub grid_size: usize,
    /// Boxes predicted per cell.
    pub boxes_per_cell: usize,
    pub num_classes: usize,
    /// Side of the square network input, in pixels.
    pub input_size: usize,
    /// Full layer stack; must end in exactly S·S·(B·5+C) values.
    pub backbone: Vec<LayerSpec>,
    /// Optional (w, h) priors, one per box slot, normalized to the input.
    pub anchors: Option<Vec<[f64; 2]>>,
    pub score_threshold: f64,
    pub nms_threshold: f64,
}

impl DetectorConfig {
    /// Desk-scale reference: four conv/leaky/pool stages (8, 16, 32, 64
    /// channels) followed by two fully connected layers.
    pub fn reference(grid_size: usize, boxes_per_cell: usize, num_classes: usize) -> Self {
        Self::with_stages(96, &[8, 16, 32, 64], grid_size, boxes_per_cell, num_classes)
    }

    /// Full-scale profile for 640-pixel inputs: six stages down to 10×10.
    pub fn full_scale(grid_size: usize, boxes_per_cell: usize, num_classes: usize) -> Self {
        Self::with_stages(640, &[8, 16, 32, 64, 64, 64], grid_size, boxes_per_cell, num_classes)
    }

    fn with_stages(input_size: usize, channels: &[usize], s: usize, b: usize, c: usize) -> Self {
        let mut backbone = Vec::new();
        for &ch in channels {
            backbone.push(LayerSpec::conv(ch, 3, 1, 1));
            backbone.push(LayerSpec::leaky(DEFAULT_LEAKY_SLOPE));
            backbone.push(LayerSpec::pool(2));
        }
        backbone.push(LayerSpec::Flatten);
        backbone.push(LayerSpec::linear(512));
        backbone.push(LayerSpec::leaky(DEFAULT_LEAKY_SLOPE));
        backbone.push(LayerSpec::linear(s * s * (b * 5 + c)));
        Self {
            grid_size: s,
            boxes_per_cell: b,
            num_classes: c,
            input_size,
            backbone,
            anchors: None,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            nms_threshold: DEFAULT_NMS_THRESHOLD,
        }
    }

    /// Values per cell: B·5 box fields plus C class scores.
    pub fn cell_len(&self) -> usize {
        self.boxes_per_cell * 5 + self.num_classes
    }

    /// S·S·(B·5+C).
    pub fn output_len(&self) -> usize {
        self.grid_size * self.grid_size * self.cell_len()
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [3, self.input_size, self.input_size]
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Configuration(m));
        if self.grid_size == 0 || self.boxes_per_cell == 0 || self.num_classes == 0 {
            return err(format!(
                "S, B, C must be ≥ 1 (got {}, {}, {})",
                self.grid_size, self.boxes_per_cell, self.num_classes
            ));
        }
        if self.input_size == 0 {
            return err("input_size must be positive".into());
        }
        if let Some(anchors) = &self.anchors {
            if anchors.len() != self.boxes_per_cell {
                return err(format!(
                    "{} anchors given for {} boxes per cell",
                    anchors.len(),
                    self.boxes_per_cell
                ));
            }
            if anchors.iter().flatten().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return err("anchor sizes must lie in (0, 1]".into());
            }
        }
        for (name, v) in [("score_threshold", self.score_threshold), ("nms_threshold", self.nms_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub lambda_coord: f64,
    pub lambda_noobj: f64,
    /// Online augmentation: each epoch every training sample passes through a
    /// freshly seeded zoom/shift/mirror/color-jitter stack.
    pub augment: bool,
    /// Leading epochs that see the plain samples even when `augment` is on.
    /// The fully connected head finds its footing much sooner on a fixed set.
    pub augment_warmup_epochs: usize,
    pub lr_schedule: LrSchedule,
}

/// Per-epoch learning-rate multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// Half cosine from `lr` in the first epoch down to `lr / 20` in the last.
    Cosine,
}

impl LrSchedule {
    pub const COSINE_FLOOR: f64 = 0.05;

    /// Learning rate for `epoch` (1-based) of `epochs`.
    pub fn lr_at(&self, lr: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => lr,
            LrSchedule::Cosine => {
                let t = if epochs > 1 { (epoch - 1) as f64 / (epochs - 1) as f64 } else { 0.0 };
                let k = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
                lr * (Self::COSINE_FLOOR + (1.0 - Self::COSINE_FLOOR) * k)
            }
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            epochs: 100,
            lr: 1e-2,
            momentum: 0.9,
            weight_decay: 5e-4,
            seed: 0,
            lambda_coord: 5.0,
            lambda_noobj: 0.5,
            augment: true,
            augment_warmup_epochs: 20,
            lr_schedule: LrSchedule::Cosine,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Configuration("batch_size must be ≥ 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Configuration("epochs must be ≥ 1".into()));
        }
        // lr = 0 is allowed: a dry run that leaves the initial weights intact
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Configuration(format!("lr {} must be finite and ≥ 0", self.lr)));
        }
        for (name, v) in [
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("lambda_coord", self.lambda_coord),
            ("lambda_noobj", self.lambda_noobj),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Configuration(format!("{name} {v} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule::Cosine;
        assert_eq!(s.lr_at(0.1, 1, 100), 0.1);
        assert!((s.lr_at(0.1, 100, 100) - 0.005).abs() < 1e-15);
        // halfway through, the cosine term is exactly one half
        let mid = s.lr_at(1.0, 3, 5);
        assert!((mid - (0.05 + 0.95 * 0.5)).abs() < 1e-12);
        assert_eq!(s.lr_at(0.1, 1, 1), 0.1);
        assert_eq!(LrSchedule::Constant.lr_at(0.1, 7, 10), 0.1);
    }

    #[test]
    fn cosine_schedule_is_non_increasing() {
        let lrs: Vec<f64> = (1..=50).map(|e| LrSchedule::Cosine.lr_at(1.0, e, 50)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }
}
