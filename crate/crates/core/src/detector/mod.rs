//! Grid detection head: network construction, target encoding, loss,
//! decoding, the end-to-end detect pipeline, and training.

mod config;
mod decode;
mod gradcheck;
mod grid;
mod loss;
mod pipeline;
mod train;

pub use config::{DetectorConfig, LrSchedule, TrainConfig, DEFAULT_NMS_THRESHOLD, DEFAULT_SCORE_THRESHOLD};
pub use decode::{decode, decode_with_threshold};
pub use gradcheck::{check_loss_once, loss_suite, toy_config};
pub use grid::{encode_targets, CellTarget, DecodedSlot, PredictionTensor, TargetTensor};
pub use loss::{yolo_loss, yolo_loss_with_grad, LossBreakdown, LossWeights};
pub use pipeline::{build_network, detect, detect_with_threshold, prepare_input};
pub use train::{train, EpochRecord, TrainLog, TrainOutcome};
