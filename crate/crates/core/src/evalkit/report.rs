//! Dataset-level evaluation reports.

use serde::{Deserialize, Serialize};

use super::latency::LatencyStats;
use super::metrics::{average_precision, match_detections, mean_ap, precision_recall_f1, RankedDetection};
use crate::datakit::{Annotation, DatasetManifest, Sample, Split};
use crate::detector::{detect_with_threshold, DetectorConfig};
use crate::error::{Error, Result};
use crate::geometry::Detection;
use crate::nn::Network;
use crate::parallel;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Score floor used when collecting detections for AP, so the precision-recall
/// sweep covers nearly the whole ranking rather than stopping at the
/// operating threshold.
pub const AP_SCORE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: usize,
    /// Absent when the class has no ground truth.
    #[serde(rename = "AP")]
    pub ap: Option<f64>,
    #[serde(rename = "P")]
    pub precision: f64,
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassReport>,
    #[serde(rename = "mAP")]
    pub map: f64,
    /// Micro-averaged over all classes at the operating threshold.
    #[serde(rename = "P")]
    pub precision: f64,
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    pub iou_threshold: f64,
    pub score_threshold: f64,
    pub images: usize,
    /// Wall-clock statistics; only present when timing was requested, since
    /// timings differ from run to run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl EvalReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Builds a report from per-image detections and ground truth.
///
/// `detections[i]` should cover every score above [`AP_SCORE_FLOOR`]; the
/// AP sweep uses all of them while P, R and F1 count only detections
/// strictly above `score_threshold`.
pub fn evaluate_detections(
    detections: &[Vec<Detection>],
    ground_truth: &[Vec<Annotation>],
    num_classes: usize,
    iou_threshold: f64,
    score_threshold: f64,
) -> Result<EvalReport> {
    if detections.len() != ground_truth.len() {
        return Err(Error::Argument(format!(
            "{} detection lists for {} images",
            detections.len(),
            ground_truth.len()
        )));
    }
    if detections.is_empty() {
        return Err(Error::Dataset("nothing to evaluate: no images".into()));
    }
    let ranked: Vec<RankedDetection> = detections
        .iter()
        .enumerate()
        .flat_map(|(image, ds)| ds.iter().map(move |&detection| RankedDetection { image, detection }))
        .collect();
    let mut per_class = Vec::with_capacity(num_classes);
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for class_id in 0..num_classes {
        let ap = average_precision(&ranked, ground_truth, class_id, iou_threshold).map(|(ap, _)| ap);
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (ds, gts) in detections.iter().zip(ground_truth) {
            let ds: Vec<Detection> = ds
                .iter()
                .filter(|d| d.class_id == class_id && d.score > score_threshold)
                .copied()
                .collect();
            let gs: Vec<Annotation> = gts.iter().filter(|a| a.class_id == class_id).copied().collect();
            let m = match_detections(&ds, &gs, iou_threshold);
            tp += m.tp;
            fp += m.fp;
            fn_ += m.fn_;
        }
        let (precision, recall, f1) = precision_recall_f1(tp, fp, fn_);
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        per_class.push(ClassReport { class_id, ap, precision, recall, f1, tp, fp, fn_ });
    }
    let map = mean_ap(&per_class.iter().map(|c| c.ap).collect::<Vec<_>>())?;
    let (precision, recall, f1) = precision_recall_f1(tp_all, fp_all, fn_all);
    Ok(EvalReport {
        per_class,
        map,
        precision,
        recall,
        f1,
        iou_threshold,
        score_threshold,
        images: detections.len(),
        latency: None,
        config: None,
    })
}

/// Runs the detector over `samples` (on up to `threads` workers, merged in
/// input order) and evaluates against their annotations.
pub fn evaluate_samples(
    net: &Network,
    cfg: &DetectorConfig,
    samples: &[Sample],
    iou_threshold: f64,
    threads: usize,
) -> Result<EvalReport> {
    let floor = AP_SCORE_FLOOR.min(cfg.score_threshold);
    let detections = parallel::map_indexed(samples.len(), threads, |i| {
        detect_with_threshold(&samples[i].image, net, cfg, floor)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let gts: Vec<Vec<Annotation>> = samples.iter().map(|s| s.annotations.clone()).collect();
    evaluate_detections(&detections, &gts, cfg.num_classes, iou_threshold, cfg.score_threshold)
}

/// Loads one split of a dataset and evaluates it.
pub fn evaluate_dataset(
    manifest: &DatasetManifest,
    split: Split,
    net: &Network,
    cfg: &DetectorConfig,
    iou_threshold: f64,
    threads: usize,
) -> Result<EvalReport> {
    let samples = manifest.load_split(split)?;
    if samples.is_empty() {
        return Err(Error::Dataset(format!("{split:?} split is empty")));
    }
    evaluate_samples(net, cfg, &samples, iou_threshold, threads)
}
