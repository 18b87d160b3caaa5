use super::grid::{sigmoid, PredictionTensor};
use super::DetectorConfig;
use crate::geometry::{sort_detections, Detection};

/// Turns raw grid predictions into detections scoring strictly above
/// `score_threshold`, boxes clipped to the unit square, sorted by score.
///
/// Score is objectness times the best class probability (class scores are
/// independent sigmoids; the argmax class is reported).
pub fn decode_with_threshold(pred: &PredictionTensor, cfg: &DetectorConfig, score_threshold: f64) -> Vec<Detection> {
    let s = cfg.grid_size;
    let anchors = cfg.anchors.as_deref();
    let mut out = Vec::new();
    for row in 0..s {
        for col in 0..s {
            let (class_id, class_p) = pred
                .class_logits(row, col)
                .iter()
                .map(|&z| sigmoid(z as f64))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, p)| if p > best.1 { (c, p) } else { best });
            for k in 0..cfg.boxes_per_cell {
                let slot = pred.decode_slot(row, col, k, anchors);
                let score = slot.objectness * class_p;
                if !(score > score_threshold) {
                    continue;
                }
                if let Some(bbox) = slot.bbox.clamp_unit() {
                    out.push(Detection {
                        bbox,
                        objectness: slot.objectness,
                        class_id,
                        score,
                    });
                }
            }
        }
    }
    sort_detections(&mut out);
    out
}

/// [`decode_with_threshold`] at the configured operating threshold.
pub fn decode(pred: &PredictionTensor, cfg: &DetectorConfig) -> Vec<Detection> {
    decode_with_threshold(pred, cfg, cfg.score_threshold)
}
