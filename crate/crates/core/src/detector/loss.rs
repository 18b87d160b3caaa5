//! Sum-squared grid detection loss.
//!
//! For a cell holding an object, the responsible slot is the one whose
//! decoded box has the highest IoU with the ground truth (lowest index on
//! ties). Terms:
//!
//! - box: `λ_coord · [(x−x̂)² + (y−ŷ)² + (√w−√ŵ)² + (√h−√ĥ)²]` on responsible slots
//! - objectness: `(1 − ô)²` on responsible slots
//! - no-objectness: `λ_noobj · ô²` on every other slot
//! - class: `Σ_c (p_c − p̂_c)²` on occupied cells
//!
//! Offsets, objectness and class scores go through a sigmoid; sizes are a
//! sigmoid in direct mode or `anchor · exp(t)` in anchor mode.

use serde::{Deserialize, Serialize};

use super::grid::{sigmoid, PredictionTensor, TargetTensor};
use super::DetectorConfig;
use crate::error::{Error, Result};
use crate::geometry::bbox_iou;

/// Per-term loss values; `total` is their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub box_loss: f64,
    pub objectness: f64,
    pub no_objectness: f64,
    pub class: f64,
}

impl LossBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.box_loss + self.objectness + self.no_objectness + self.class;
        self
    }

    pub fn add(&mut self, other: &LossBreakdown) {
        self.total += other.total;
        self.box_loss += other.box_loss;
        self.objectness += other.objectness;
        self.no_objectness += other.no_objectness;
        self.class += other.class;
    }

    pub fn scaled(&self, k: f64) -> LossBreakdown {
        LossBreakdown {
            total: self.total * k,
            box_loss: self.box_loss * k,
            objectness: self.objectness * k,
            no_objectness: self.no_objectness * k,
            class: self.class * k,
        }
    }

    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("box", self.box_loss),
            ("objectness", self.objectness),
            ("no_objectness", self.no_objectness),
            ("class", self.class),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

/// Loss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub coord: f64,
    pub noobj: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { coord: 5.0, noobj: 0.5 }
    }
}

/// Loss value only.
pub fn yolo_loss(pred: &PredictionTensor, target: &TargetTensor, cfg: &DetectorConfig, weights: LossWeights) -> Result<LossBreakdown> {
    loss_impl(pred, target, cfg, weights, None)
}

/// Loss value and its gradient with respect to every raw prediction.
pub fn yolo_loss_with_grad(
    pred: &PredictionTensor,
    target: &TargetTensor,
    cfg: &DetectorConfig,
    weights: LossWeights,
) -> Result<(LossBreakdown, Vec<f32>)> {
    let mut grad = vec![0f32; pred.data.len()];
    let loss = loss_impl(pred, target, cfg, weights, Some(&mut grad))?;
    Ok((loss, grad))
}

fn loss_impl(
    pred: &PredictionTensor,
    target: &TargetTensor,
    cfg: &DetectorConfig,
    weights: LossWeights,
    mut grad: Option<&mut [f32]>,
) -> Result<LossBreakdown> {
    if (pred.grid_size, pred.boxes_per_cell, pred.num_classes)
        != (target.grid_size, target.boxes_per_cell, target.num_classes)
        || pred.data.len() != cfg.output_len()
    {
        return Err(Error::shape(
            "yolo_loss",
            format!(
                "prediction (S={}, B={}, C={}) and target (S={}, B={}, C={}) disagree",
                pred.grid_size, pred.boxes_per_cell, pred.num_classes, target.grid_size, target.boxes_per_cell, target.num_classes
            ),
        ));
    }
    let s = cfg.grid_size;
    let b = cfg.boxes_per_cell;
    let n = cfg.cell_len();
    let anchors = cfg.anchors.as_deref();
    let mut loss = LossBreakdown::default();
    let mut put = |i: usize, g: f64| {
        if let Some(gr) = grad.as_deref_mut() {
            gr[i] = g as f32;
        }
    };

    for row in 0..s {
        for col in 0..s {
            let base = (row * s + col) * n;
            let responsible = target.cell(row, col).map(|t| {
                let gt = t.bbox(row, col, s);
                let mut best = 0;
                let mut best_iou = f64::NEG_INFINITY;
                for k in 0..b {
                    let iou = bbox_iou(&pred.decode_slot(row, col, k, anchors).bbox, &gt);
                    if iou > best_iou {
                        best = k;
                        best_iou = iou;
                    }
                }
                (best, *t)
            });

            for k in 0..b {
                let [tx, ty, tw, th, to] = pred.slot(row, col, k).map(f64::from);
                let o = sigmoid(to);
                let slot = base + k * 5;
                match responsible {
                    Some((r, t)) if r == k => {
                        let (x, y) = (sigmoid(tx), sigmoid(ty));
                        // (√size, d√size/dt)
                        let root = |tv: f64, dim: usize| -> (f64, f64) {
                            match anchors {
                                Some(a) => {
                                    let v = a[k][dim].sqrt() * (tv / 2.0).exp();
                                    (v, v / 2.0)
                                }
                                None => {
                                    let sg = sigmoid(tv);
                                    let v = sg.sqrt();
                                    (v, (1.0 - sg) * v / 2.0)
                                }
                            }
                        };
                        let (rw, drw) = root(tw, 0);
                        let (rh, drh) = root(th, 1);
                        let (ex, ey) = (x - t.offset_x, y - t.offset_y);
                        let (ew, eh) = (rw - t.w.sqrt(), rh - t.h.sqrt());
                        loss.box_loss += weights.coord * (ex * ex + ey * ey + ew * ew + eh * eh);
                        let c2 = 2.0 * weights.coord;
                        put(slot, c2 * ex * x * (1.0 - x));
                        put(slot + 1, c2 * ey * y * (1.0 - y));
                        put(slot + 2, c2 * ew * drw);
                        put(slot + 3, c2 * eh * drh);
                        let eo = o - 1.0;
                        loss.objectness += eo * eo;
                        put(slot + 4, 2.0 * eo * o * (1.0 - o));
                    }
                    _ => {
                        loss.no_objectness += weights.noobj * o * o;
                        put(slot + 4, 2.0 * weights.noobj * o * o * (1.0 - o));
                    }
                }
            }

            if let Some((_, t)) = responsible {
                let logits = pred.class_logits(row, col);
                for (c, &z) in logits.iter().enumerate() {
                    let p = sigmoid(z as f64);
                    let want = if c == t.class_id { 1.0 } else { 0.0 };
                    let e = p - want;
                    loss.class += e * e;
                    put(base + b * 5 + c, 2.0 * e * p * (1.0 - p));
                }
            }
        }
    }
    Ok(loss.finish())
}
