//! Run configuration: one flat JSON object shared by every subcommand.

use std::path::PathBuf;

use heliodet::detector::{DetectorConfig, LrSchedule, TrainConfig, DEFAULT_NMS_THRESHOLD, DEFAULT_SCORE_THRESHOLD};
use heliodet::evalkit::DEFAULT_IOU_THRESHOLD;
use heliodet::synthgen::{Background, SynthParams};
use heliodet::{Error, Result};
use serde::{Deserialize, Serialize};

/// Network input scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 96-pixel reference network.
    Desk,
    /// 640-pixel inputs.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    // detector
    pub profile: Profile,
    pub grid_size: usize,
    pub boxes_per_cell: usize,
    pub num_classes: usize,
    /// Overrides the profile's input size when set.
    pub input_size: Option<usize>,
    pub anchors: Option<Vec<[f64; 2]>>,
    pub score_threshold: f64,
    pub nms_threshold: f64,

    // training
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lambda_coord: f64,
    pub lambda_noobj: f64,
    pub augment: bool,
    pub augment_warmup_epochs: usize,
    pub lr_schedule: LrSchedule,

    // dataset
    pub n_images: usize,
    pub train_fraction: f64,
    pub ops_per_image: usize,
    pub image_size: usize,
    pub n_cells: [usize; 2],
    pub n_distractors: [usize; 2],
    pub cell_size: [f64; 2],
    pub background: Background,
    pub lighting: [f64; 2],
    pub occlusion_prob: f64,
    pub blur_prob: f64,
    pub reflection_prob: f64,
    pub shadow_prob: f64,

    // evaluation
    pub iou_threshold: f64,
    pub split: heliodet::datakit::Split,
    pub measure_latency: bool,
    pub warmup: usize,

    // paths
    pub dataset: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub train_log: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub overlay: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthParams::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            profile: Profile::Desk,
            grid_size: 6,
            boxes_per_cell: 2,
            num_classes: 1,
            input_size: None,
            anchors: None,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            nms_threshold: DEFAULT_NMS_THRESHOLD,
            batch_size: train.batch_size,
            epochs: train.epochs,
            lr: train.lr,
            momentum: train.momentum,
            weight_decay: train.weight_decay,
            lambda_coord: train.lambda_coord,
            lambda_noobj: train.lambda_noobj,
            augment: train.augment,
            augment_warmup_epochs: train.augment_warmup_epochs,
            lr_schedule: train.lr_schedule,
            n_images: 300,
            train_fraction: 0.8,
            ops_per_image: 2,
            image_size: synth.image_size,
            n_cells: synth.n_cells,
            n_distractors: synth.n_distractors,
            cell_size: synth.cell_size,
            background: synth.background,
            lighting: synth.lighting,
            occlusion_prob: synth.occlusion_prob,
            blur_prob: synth.blur_prob,
            reflection_prob: synth.reflection_prob,
            shadow_prob: synth.shadow_prob,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            split: heliodet::datakit::Split::Test,
            measure_latency: false,
            warmup: 5,
            dataset: None,
            weights: None,
            report: None,
            train_log: None,
            image: None,
            overlay: None,
        }
    }
}

fn key_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Parses and validates a configuration document. Missing keys take their
/// defaults; unknown keys, type mismatches and out-of-range values are
/// reported against the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // unknown fields surface at the parent path; name the field itself
        let key = match message.strip_prefix("unknown field `") {
            Some(rest) => rest.split('`').next().unwrap_or(&path).to_string(),
            None => path,
        };
        key_error(&key, message)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grid_size", self.grid_size),
            ("boxes_per_cell", self.boxes_per_cell),
            ("num_classes", self.num_classes),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(key_error(key, "must be ≥ 1"));
            }
        }
        if self.input_size == Some(0) {
            return Err(key_error("input_size", "must be ≥ 1"));
        }
        for (key, v) in [
            ("score_threshold", self.score_threshold),
            ("nms_threshold", self.nms_threshold),
            ("iou_threshold", self.iou_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(key_error(key, format!("{v} outside [0, 1]")));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(key_error("train_fraction", format!("{} outside (0, 1)", self.train_fraction)));
        }
        if self.n_images < 2 {
            return Err(key_error("n_images", "must be ≥ 2"));
        }
        for (key, v) in [
            ("lr", self.lr),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("lambda_coord", self.lambda_coord),
            ("lambda_noobj", self.lambda_noobj),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(key_error(key, format!("{v} must be finite and ≥ 0")));
            }
        }
        self.synth_params().validate()?;
        self.detector_config().validate().map_err(|e| match e {
            Error::Configuration(m) => key_error("detector", m),
            other => other,
        })?;
        Ok(())
    }

    pub fn detector_config(&self) -> DetectorConfig {
        let (s, b, c) = (self.grid_size, self.boxes_per_cell, self.num_classes);
        let mut cfg = match self.profile {
            Profile::Desk => DetectorConfig::reference(s, b, c),
            Profile::Full => DetectorConfig::full_scale(s, b, c),
        };
        if let Some(n) = self.input_size {
            cfg.input_size = n;
        }
        cfg.anchors = self.anchors.clone();
        cfg.score_threshold = self.score_threshold;
        cfg.nms_threshold = self.nms_threshold;
        cfg
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed: self.seed,
            lambda_coord: self.lambda_coord,
            lambda_noobj: self.lambda_noobj,
            augment: self.augment,
            augment_warmup_epochs: self.augment_warmup_epochs,
            lr_schedule: self.lr_schedule,
        }
    }

    pub fn synth_params(&self) -> SynthParams {
        SynthParams {
            image_size: self.image_size,
            n_cells: self.n_cells,
            n_distractors: self.n_distractors,
            cell_size: self.cell_size,
            background: self.background,
            lighting: self.lighting,
            occlusion_prob: self.occlusion_prob,
            blur_prob: self.blur_prob,
            reflection_prob: self.reflection_prob,
            shadow_prob: self.shadow_prob,
            seed: self.seed,
        }
    }

    /// The effective configuration as JSON, for embedding in artifacts.
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
