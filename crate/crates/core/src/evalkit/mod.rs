//! Detection metrics: matching, precision, recall, F1, AP, mAP, and latency.

mod latency;
mod metrics;
mod report;

pub use latency::{bench_latency, LatencyStats};
pub use metrics::{
    average_precision, f1_score, match_detections, mean_ap, precision_recall_f1, MatchResult, PrCurve,
    RankedDetection,
};
pub use report::{
    evaluate_dataset, evaluate_detections, evaluate_samples, ClassReport, EvalReport, AP_SCORE_FLOOR,
    DEFAULT_IOU_THRESHOLD,
};
