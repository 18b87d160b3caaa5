//! Orientation normalization and letterboxing of labeled images.

use super::labels::Annotation;
use super::manifest::Sample;
use crate::error::{Error, Result};
use crate::geometry::{xywhn_to_xyxy, BBox, CornerBox};
use crate::imagery::{letterbox, Image, LetterboxTransform, DEFAULT_PAD_VALUE};

/// Box after rotating its image clockwise by `orient` degrees.
pub fn rotate_bbox(b: &BBox, orient: u32) -> BBox {
    match orient % 360 {
        90 => BBox { cx: 1.0 - b.cy, cy: b.cx, w: b.h, h: b.w },
        180 => BBox { cx: 1.0 - b.cx, cy: 1.0 - b.cy, w: b.w, h: b.h },
        270 => BBox { cx: b.cy, cy: 1.0 - b.cx, w: b.h, h: b.w },
        _ => *b,
    }
}

/// Rotates an image and its boxes clockwise by `orient` degrees (a multiple of 90).
pub fn orient_sample(img: &Image, annots: &[Annotation], orient: u32) -> Sample {
    Sample {
        image: img.rotate90(orient / 90),
        annotations: annots
            .iter()
            .map(|a| Annotation::new(a.class_id, rotate_bbox(&a.bbox, orient)))
            .collect(),
    }
}

/// Maps normalized source boxes into the letterboxed frame.
pub fn letterbox_boxes(annots: &[Annotation], t: &LetterboxTransform) -> Vec<Annotation> {
    annots
        .iter()
        .filter_map(|a| {
            let c = xywhn_to_xyxy(&a.bbox, t.src_w, t.src_h);
            let [x1, y1, x2, y2] = t.forward_box([c.x1, c.y1, c.x2, c.y2]);
            let n = CornerBox::new(
                x1 / t.dst_w as f64,
                y1 / t.dst_h as f64,
                x2 / t.dst_w as f64,
                y2 / t.dst_h as f64,
            );
            BBox::from_corners(&n)
                .clamp_unit()
                .map(|bbox| Annotation::new(a.class_id, bbox))
        })
        .collect()
}

/// Rotates by `orient` (clockwise degrees), then letterboxes to a square
/// `target_size` frame with boxes following the image.
pub fn preprocess(
    img: &Image,
    annots: &[Annotation],
    orient: u32,
    target_size: usize,
) -> Result<(Image, Vec<Annotation>, LetterboxTransform)> {
    if orient % 90 != 0 {
        return Err(Error::Argument(format!("orientation {orient} is not a multiple of 90")));
    }
    let upright = orient_sample(img, annots, orient);
    let (out, t) = letterbox(&upright.image, target_size, target_size, DEFAULT_PAD_VALUE)?;
    let boxes = letterbox_boxes(&upright.annotations, &t);
    Ok((out, boxes, t))
}
