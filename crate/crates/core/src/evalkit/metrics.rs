//! Matching, precision/recall/F1, average precision, and mAP.

use serde::{Deserialize, Serialize};

use crate::datakit::Annotation;
use crate::error::{Error, Result};
use crate::geometry::{bbox_iou, Detection};

/// Outcome of matching one image's detections against its ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// (detection index, ground-truth index, IoU) for every true positive.
    pub pairs: Vec<(usize, usize, f64)>,
}

/// Indices of `dets` by descending score; equal scores keep input order.
fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// The unmatched same-class ground truth with the highest IoU at or above
/// `iou_threshold` (lower index on ties).
fn best_match(det: &Detection, gts: &[Annotation], taken: &[bool], iou_threshold: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (g, gt) in gts.iter().enumerate() {
        if taken[g] || gt.class_id != det.class_id {
            continue;
        }
        let iou = bbox_iou(&det.bbox, &gt.bbox);
        if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
            best = Some((g, iou));
        }
    }
    best
}

/// Greedy one-to-one matching in descending score order.
pub fn match_detections(dets: &[Detection], gts: &[Annotation], iou_threshold: f64) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for d in score_order(dets) {
        if let Some((g, iou)) = best_match(&dets[d], gts, &taken, iou_threshold) {
            taken[g] = true;
            pairs.push((d, g, iou));
        }
    }
    MatchResult {
        tp: pairs.len(),
        fp: dets.len() - pairs.len(),
        fn_: gts.len() - pairs.len(),
        pairs,
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

/// (precision, recall, F1) with 0/0 taken as 0.
pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = ratio(tp as f64, (tp + fp) as f64);
    let r = ratio(tp as f64, (tp + fn_) as f64);
    (p, r, f1_score(p, r))
}

/// Precision-recall points in ranking order, `(recall, precision)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>,
}

impl PrCurve {
    /// Area under the precision envelope: each precision is replaced by the
    /// largest precision at equal or higher recall, then integrated over the
    /// recall steps.
    pub fn envelope_area(&self) -> f64 {
        let mut area = 0.0;
        let mut envelope = 0.0f64;
        let mut prev_recall = None;
        // walk backwards so the running max is the envelope
        let mut steps = Vec::with_capacity(self.points.len());
        for &(r, p) in self.points.iter().rev() {
            envelope = envelope.max(p);
            steps.push((r, envelope));
        }
        steps.reverse();
        for (r, p) in steps {
            let r0 = prev_recall.unwrap_or(0.0);
            area += (r - r0) * p;
            prev_recall = Some(r);
        }
        area
    }
}

/// A detection tagged with the image it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedDetection {
    pub image: usize,
    pub detection: Detection,
}

/// Average precision of one class over a dataset.
///
/// `gts[i]` holds the ground truth of image `i`; only annotations of
/// `class_id` are considered, and detections of other classes are ignored.
/// Returns `None` when the class has no ground truth.
pub fn average_precision(
    dets: &[RankedDetection],
    gts: &[Vec<Annotation>],
    class_id: usize,
    iou_threshold: f64,
) -> Option<(f64, PrCurve)> {
    let n_gt: usize = gts.iter().map(|g| g.iter().filter(|a| a.class_id == class_id).count()).sum();
    if n_gt == 0 {
        return None;
    }
    let mut mine: Vec<&RankedDetection> = dets.iter().filter(|d| d.detection.class_id == class_id).collect();
    mine.sort_by(|a, b| b.detection.score.total_cmp(&a.detection.score));
    let mut taken: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve = PrCurve::default();
    for d in mine {
        match gts.get(d.image).and_then(|g| best_match(&d.detection, g, &taken[d.image], iou_threshold)) {
            Some((g, _)) => {
                taken[d.image][g] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        curve.points.push((tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    Some((curve.envelope_area(), curve))
}

/// Mean over the defined APs.
pub fn mean_ap(aps: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = aps.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Argument("no class has ground truth; mAP is undefined".into()));
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}
