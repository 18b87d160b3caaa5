//! Box representations, IoU, and class-aware non-maximum suppression.
//!
//! Boxes are stored normalized in center format (`cx, cy, w, h` relative to
//! the image). Corner boxes (`x1, y1, x2, y2`) are used for overlap math and
//! may be in any consistent unit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized center-format box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

/// Corner-format box, `x1 < x2`, `y1 < y2` when well formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl CornerBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        (self.x2 - self.x1).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y2 - self.y1).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection(&self, other: &CornerBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Clips to `[x_lo, x_hi] × [y_lo, y_hi]`.
    pub fn clip(&self, x_lo: f64, y_lo: f64, x_hi: f64, y_hi: f64) -> CornerBox {
        CornerBox {
            x1: self.x1.clamp(x_lo, x_hi),
            y1: self.y1.clamp(y_lo, y_hi),
            x2: self.x2.clamp(x_lo, x_hi),
            y2: self.y2.clamp(y_lo, y_hi),
        }
    }

    /// Axis-aligned hull of a point set.
    pub fn hull(points: &[(f64, f64)]) -> CornerBox {
        let mut b = CornerBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            b.x1 = b.x1.min(x);
            b.y1 = b.y1.min(y);
            b.x2 = b.x2.max(x);
            b.y2 = b.y2.max(y);
        }
        b
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x1, self.y1),
            (self.x2, self.y1),
            (self.x2, self.y2),
            (self.x1, self.y2),
        ]
    }

    pub fn scale(&self, sx: f64, sy: f64) -> CornerBox {
        CornerBox::new(self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)
    }
}

impl BBox {
    /// Validated constructor: centers in [0, 1], sizes in (0, 1], and a
    /// positive area once clipped to the unit square.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Argument(format!("box {what} = {v} out of range")));
        for (name, v) in [("cx", self.cx), ("cy", self.cy)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(name, v);
            }
        }
        for (name, v) in [("w", self.w), ("h", self.h)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(name, v);
            }
        }
        if self.to_corners().clip(0.0, 0.0, 1.0, 1.0).area() <= 0.0 {
            return Err(Error::Argument("box has no area inside the image".into()));
        }
        Ok(())
    }

    /// Normalized corners.
    pub fn to_corners(&self) -> CornerBox {
        CornerBox::new(
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    /// Center-format box from normalized corners (unvalidated).
    pub fn from_corners(c: &CornerBox) -> Self {
        Self {
            cx: (c.x1 + c.x2) / 2.0,
            cy: (c.y1 + c.y2) / 2.0,
            w: c.x2 - c.x1,
            h: c.y2 - c.y1,
        }
    }

    /// Clips to the unit square. Returns `None` when nothing remains.
    pub fn clamp_unit(&self) -> Option<BBox> {
        let c = self.to_corners().clip(0.0, 0.0, 1.0, 1.0);
        (c.width() > 0.0 && c.height() > 0.0).then(|| BBox::from_corners(&c))
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Normalized center box to pixel corners on a `img_w`×`img_h` image.
pub fn xywhn_to_xyxy(b: &BBox, img_w: usize, img_h: usize) -> CornerBox {
    b.to_corners().scale(img_w as f64, img_h as f64)
}

/// Pixel corners back to a normalized center box (unvalidated).
pub fn xyxy_to_xywhn(c: &CornerBox, img_w: usize, img_h: usize) -> BBox {
    BBox::from_corners(&c.scale(1.0 / img_w as f64, 1.0 / img_h as f64))
}

/// Intersection over union. Degenerate boxes give 0.
pub fn iou(a: &CornerBox, b: &CornerBox) -> f64 {
    let inter = a.intersection(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

/// IoU of two normalized center boxes.
pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    iou(&a.to_corners(), &b.to_corners())
}

/// A scored detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub objectness: f64,
    pub class_id: usize,
    /// Objectness times class probability.
    pub score: f64,
}

/// Orders by score descending, then class id, then center x.
pub fn sort_detections(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.class_id.cmp(&b.class_id))
            .then(a.bbox.cx.total_cmp(&b.bbox.cx))
    });
}

/// Greedy class-aware non-maximum suppression.
///
/// A detection survives iff its IoU with every already-kept detection of the
/// same class is at most `iou_threshold`. Output follows keep order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sort_detections(&mut sorted);
    let mut kept: Vec<Detection> = Vec::with_capacity(sorted.len());
    for d in sorted {
        let corners = d.bbox.to_corners();
        let suppressed = kept
            .iter()
            .filter(|k| k.class_id == d.class_id)
            .any(|k| iou(&k.bbox.to_corners(), &corners) > iou_threshold);
        if !suppressed {
            kept.push(d);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(cx: f64, cy: f64, w: f64, h: f64, score: f64, class_id: usize) -> Detection {
        Detection {
            bbox: BBox { cx, cy, w, h },
            objectness: score,
            class_id,
            score,
        }
    }

    #[test]
    fn conversions() {
        let c = xywhn_to_xyxy(&BBox::new(0.5, 0.5, 0.5, 0.5).unwrap(), 640, 640);
        assert_eq!(c, CornerBox::new(160.0, 160.0, 480.0, 480.0));
        let c = xywhn_to_xyxy(&BBox::new(0.5, 0.5, 1.0, 1.0).unwrap(), 37, 91);
        assert_eq!(c, CornerBox::new(0.0, 0.0, 37.0, 91.0));
        let c = xywhn_to_xyxy(&BBox::new(0.25, 0.5, 0.1, 0.2).unwrap(), 100, 200);
        for (got, want) in [c.x1, c.y1, c.x2, c.y2].iter().zip([20.0, 80.0, 30.0, 120.0]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn bbox_validation() {
        assert!(BBox::new(1.2, 0.5, 0.2, 0.3).is_err());
        assert!(BBox::new(0.5, 0.5, 0.0, 0.3).is_err());
        assert!(BBox::new(0.5, 0.5, 1.1, 0.3).is_err());
        assert!(BBox::new(1.0, 1.0, 0.2, 0.2).is_ok());
    }

    #[test]
    fn iou_cases() {
        let a = CornerBox::new(0.0, 0.0, 2.0, 2.0);
        let b = CornerBox::new(1.0, 1.0, 3.0, 3.0);
        assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &CornerBox::new(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &CornerBox::new(1.0, 1.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn nms_keeps_best_of_duplicates() {
        let out = nms(&[det(0.5, 0.5, 0.2, 0.2, 0.8, 0), det(0.5, 0.5, 0.2, 0.2, 0.9, 0)], 0.45);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn nms_is_class_aware() {
        let out = nms(&[det(0.5, 0.5, 0.2, 0.2, 0.9, 0), det(0.5, 0.5, 0.2, 0.2, 0.8, 1)], 0.45);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn nms_chain_keeps_first_and_third() {
        // A and C nest inside B with A ∪ C = B: IoU(A,B) = IoU(B,C) = 0.6, IoU(A,C) = 0.2.
        let mk = |x1: f64, x2: f64, s: f64| det((x1 + x2) / 2.0, 0.5, x2 - x1, 0.1, s, 0);
        let a = mk(0.0, 0.6, 0.9);
        let b = mk(0.0, 1.0, 0.8);
        let c = mk(0.4, 1.0, 0.7);
        assert!((bbox_iou(&a.bbox, &b.bbox) - 0.6).abs() < 1e-9);
        assert!((bbox_iou(&a.bbox, &c.bbox) - 0.2).abs() < 1e-9);
        assert!((bbox_iou(&b.bbox, &c.bbox) - 0.6).abs() < 1e-9);
        assert_eq!(nms(&[c, a, b], 0.45), vec![a, c]);
    }

    #[test]
    fn nms_empty() {
        assert!(nms(&[], 0.45).is_empty());
    }

    #[test]
    fn nms_tie_break_is_deterministic() {
        let x = det(0.7, 0.5, 0.1, 0.1, 0.5, 1);
        let y = det(0.2, 0.5, 0.1, 0.1, 0.5, 0);
        let z = det(0.1, 0.5, 0.1, 0.1, 0.5, 1);
        assert_eq!(nms(&[x, y, z], 0.45), vec![y, z, x]);
    }
}
