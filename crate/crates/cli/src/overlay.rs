use heliodet::geometry::{xywhn_to_xyxy, Detection};
use heliodet::imagery::Image;

const BOX_COLOR: [u8; 3] = [255, 40, 40];
const THICKNESS: i64 = 2;

/// Burns detection outlines into a copy of `img`.
pub fn draw_detections(img: &Image, dets: &[Detection]) -> Image {
    let mut out = img.to_rgb();
    let (w, h) = (out.width() as i64, out.height() as i64);
    for d in dets {
        let c = xywhn_to_xyxy(&d.bbox, out.width(), out.height());
        let (x1, y1) = (c.x1.round() as i64, c.y1.round() as i64);
        let (x2, y2) = ((c.x2.round() as i64 - 1).max(x1), (c.y2.round() as i64 - 1).max(y1));
        for y in y1..=y2 {
            for x in x1..=x2 {
                let edge = x - x1 < THICKNESS || x2 - x < THICKNESS || y - y1 < THICKNESS || y2 - y < THICKNESS;
                if edge && (0..w).contains(&x) && (0..h).contains(&y) {
                    out.pixel_mut(x as usize, y as usize).copy_from_slice(&BOX_COLOR);
                }
            }
        }
    }
    out
}
