//! Box-aware image augmentation.
//!
//! Pixel-only ops leave annotations alone. Geometric ops push the four
//! corners of every box through the same continuous map used to resample the
//! image, take the axis-aligned hull, clip to the frame, and drop boxes that
//! keep less than [`MIN_VISIBILITY`] of their mapped area.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::labels::Annotation;
use super::manifest::Sample;
use super::preprocess::rotate_bbox;
use crate::error::{Error, Result};
use crate::geometry::{xyxy_to_xywhn, CornerBox};
use crate::imagery::{
    adjust_brightness, adjust_exposure, adjust_hue, adjust_saturation, box_blur, fill_rect,
    grayscale, resize_bilinear, Image, DEFAULT_PAD_VALUE,
};
use crate::rng;

/// Fraction of a mapped box that must stay inside the frame.
pub const MIN_VISIBILITY: f64 = 0.25;

/// Operation and its magnitude. Ranges accepted by [`AugmentOp::validate`]
/// are listed per variant.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentKind {
    /// Seeded window covering `scale` of each side, resized back to the
    /// original size. `scale` in [0.25, 1].
    Crop { scale: f64 },
    /// Clockwise quarter turns, 1 to 3.
    Rotation90 { quarter_turns: u32 },
    /// Horizontal shear about the image center, |degrees| ≤ 20.
    Shear { degrees: f64 },
    Grayscale,
    /// Hue rotation, |degrees| ≤ 180.
    Hue { degrees: f64 },
    /// Saturation multiplier in [0, 2].
    Saturation { factor: f64 },
    /// Additive shift in units of full scale, |delta| ≤ 0.4.
    Brightness { delta: f64 },
    /// Gamma in [0.5, 2].
    Exposure { gamma: f64 },
    /// Box blur radius 1 to 5.
    Blur { radius: usize },
    /// Gaussian noise standard deviation in intensity levels, (0, 50].
    Noise { sigma: f64 },
    /// Seeded rectangle covering `fraction` of each side, filled with the
    /// pad value. `fraction` in (0, 0.5].
    Cutout { fraction: f64 },
    Hflip,
    /// Zoom about the center, factor in [0.5, 2].
    Scale { factor: f64 },
    /// Shift by fractions of the image size, |dx|, |dy| ≤ 0.5.
    Translate { dx: f64, dy: f64 },
    /// 2×2 mosaic of the input and three partner samples.
    Mosaic { partners: Vec<Sample> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOp {
    pub kind: AugmentKind,
    pub seed: u64,
}

impl AugmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            AugmentKind::Crop { .. } => "crop",
            AugmentKind::Rotation90 { .. } => "rotation90",
            AugmentKind::Shear { .. } => "shear",
            AugmentKind::Grayscale => "grayscale",
            AugmentKind::Hue { .. } => "hue",
            AugmentKind::Saturation { .. } => "saturation",
            AugmentKind::Brightness { .. } => "brightness",
            AugmentKind::Exposure { .. } => "exposure",
            AugmentKind::Blur { .. } => "blur",
            AugmentKind::Noise { .. } => "noise",
            AugmentKind::Cutout { .. } => "cutout",
            AugmentKind::Hflip => "hflip",
            AugmentKind::Scale { .. } => "scale",
            AugmentKind::Translate { .. } => "translate",
            AugmentKind::Mosaic { .. } => "mosaic",
        }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            AugmentKind::Crop { .. }
                | AugmentKind::Rotation90 { .. }
                | AugmentKind::Shear { .. }
                | AugmentKind::Hflip
                | AugmentKind::Scale { .. }
                | AugmentKind::Translate { .. }
                | AugmentKind::Mosaic { .. }
        )
    }
}

impl AugmentOp {
    pub fn new(kind: AugmentKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: String| if ok { Ok(()) } else { Err(Error::Argument(what)) };
        match &self.kind {
            AugmentKind::Crop { scale } => check((0.25..=1.0).contains(scale), format!("crop scale {scale} outside [0.25, 1]")),
            AugmentKind::Rotation90 { quarter_turns } => check((1..=3).contains(quarter_turns), format!("quarter turns {quarter_turns} outside 1..=3")),
            AugmentKind::Shear { degrees } => check(degrees.abs() <= 20.0, format!("shear {degrees}° exceeds 20°")),
            AugmentKind::Grayscale | AugmentKind::Hflip => Ok(()),
            AugmentKind::Hue { degrees } => check(degrees.abs() <= 180.0, format!("hue shift {degrees}° exceeds 180°")),
            AugmentKind::Saturation { factor } => check((0.0..=2.0).contains(factor), format!("saturation factor {factor} outside [0, 2]")),
            AugmentKind::Brightness { delta } => check(delta.abs() <= 0.4, format!("brightness shift {delta} exceeds 0.4")),
            AugmentKind::Exposure { gamma } => check((0.5..=2.0).contains(gamma), format!("exposure gamma {gamma} outside [0.5, 2]")),
            AugmentKind::Blur { radius } => check((1..=5).contains(radius), format!("blur radius {radius} outside 1..=5")),
            AugmentKind::Noise { sigma } => check(*sigma > 0.0 && *sigma <= 50.0, format!("noise sigma {sigma} outside (0, 50]")),
            AugmentKind::Cutout { fraction } => check(*fraction > 0.0 && *fraction <= 0.5, format!("cutout fraction {fraction} outside (0, 0.5]")),
            AugmentKind::Scale { factor } => check((0.5..=2.0).contains(factor), format!("scale factor {factor} outside [0.5, 2]")),
            AugmentKind::Translate { dx, dy } => check(dx.abs() <= 0.5 && dy.abs() <= 0.5, format!("translation ({dx}, {dy}) exceeds 0.5")),
            AugmentKind::Mosaic { partners } => check(partners.len() == 3, format!("mosaic needs 3 partners, got {}", partners.len())),
        }
    }
}

/// Bilinear sample at continuous coordinates (pixel centers sit at `i + 0.5`).
/// Points outside the image read as `pad`.
fn sample(img: &Image, x: f64, y: f64, pad: u8, out: &mut [u8]) {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
        out.fill(pad);
        return;
    }
    let sx = (x - 0.5).clamp(0.0, w - 1.0);
    let sy = (y - 0.5).clamp(0.0, h - 1.0);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    for (ch, o) in out.iter_mut().enumerate() {
        let p = |xx: usize, yy: usize| img.pixel(xx, yy)[ch] as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        *o = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
}

/// Resamples through `inverse`, which maps output coordinates to source
/// coordinates.
fn warp(img: &Image, out_w: usize, out_h: usize, inverse: impl Fn(f64, f64) -> (f64, f64)) -> Image {
    let c = img.channels();
    let mut out = Image::filled(out_w, out_h, c, DEFAULT_PAD_VALUE).expect("positive size");
    for v in 0..out_h {
        for u in 0..out_w {
            let (x, y) = inverse(u as f64 + 0.5, v as f64 + 0.5);
            sample(img, x, y, DEFAULT_PAD_VALUE, out.pixel_mut(u, v));
        }
    }
    out
}

/// Pushes boxes through `forward` (source pixels to output pixels).
fn map_boxes(
    annots: &[Annotation],
    src: (usize, usize),
    dst: (usize, usize),
    forward: impl Fn(f64, f64) -> (f64, f64),
) -> Vec<Annotation> {
    annots
        .iter()
        .filter_map(|a| {
            let corners = a.bbox.to_corners().scale(src.0 as f64, src.1 as f64).corners();
            let mapped: Vec<(f64, f64)> = corners.iter().map(|&(x, y)| forward(x, y)).collect();
            let hull = CornerBox::hull(&mapped);
            let visible = hull.clip(0.0, 0.0, dst.0 as f64, dst.1 as f64);
            if hull.area() <= 0.0 || visible.area() < MIN_VISIBILITY * hull.area() {
                return None;
            }
            let b = xyxy_to_xywhn(&visible, dst.0, dst.1).clamp_unit()?;
            Some(Annotation::new(a.class_id, b))
        })
        .collect()
}

fn geometric(
    img: &Image,
    annots: &[Annotation],
    forward: impl Fn(f64, f64) -> (f64, f64),
    inverse: impl Fn(f64, f64) -> (f64, f64),
) -> (Image, Vec<Annotation>) {
    let (w, h) = (img.width(), img.height());
    (warp(img, w, h, inverse), map_boxes(annots, (w, h), (w, h), forward))
}

/// Applies one operation. Annotations that leave the frame are dropped; an
/// empty list is a valid result.
pub fn augment(img: &Image, annots: &[Annotation], op: &AugmentOp) -> Result<(Image, Vec<Annotation>)> {
    op.validate()?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    let mut rng = rng::rng(op.seed);
    let pixel_only = |out: Image| Ok((out, annots.to_vec()));
    match &op.kind {
        AugmentKind::Grayscale => pixel_only(grayscale(img)),
        AugmentKind::Hue { degrees } => pixel_only(adjust_hue(img, *degrees)),
        AugmentKind::Saturation { factor } => pixel_only(adjust_saturation(img, *factor)),
        AugmentKind::Brightness { delta } => pixel_only(adjust_brightness(img, *delta)),
        AugmentKind::Exposure { gamma } => pixel_only(adjust_exposure(img, *gamma)),
        AugmentKind::Blur { radius } => pixel_only(box_blur(img, *radius)),
        AugmentKind::Noise { sigma } => {
            let normal = Normal::new(0.0, *sigma).expect("validated sigma");
            let mut out = img.clone();
            for v in out.data_mut() {
                *v = (*v as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
            }
            pixel_only(out)
        }
        AugmentKind::Cutout { fraction } => {
            let cw = ((img.width() as f64 * fraction).round() as usize).max(1);
            let ch = ((img.height() as f64 * fraction).round() as usize).max(1);
            let x0 = rng.random_range(0..=img.width() - cw.min(img.width()));
            let y0 = rng.random_range(0..=img.height() - ch.min(img.height()));
            let mut out = img.clone();
            fill_rect(&mut out, x0, y0, x0 + cw, y0 + ch, &[DEFAULT_PAD_VALUE]);
            pixel_only(out)
        }
        AugmentKind::Hflip => Ok((
            img.flip_horizontal(),
            annots
                .iter()
                .map(|a| {
                    let mut b = a.bbox;
                    b.cx = 1.0 - b.cx;
                    Annotation::new(a.class_id, b)
                })
                .collect(),
        )),
        AugmentKind::Rotation90 { quarter_turns } => Ok((
            img.rotate90(*quarter_turns),
            annots
                .iter()
                .map(|a| Annotation::new(a.class_id, rotate_bbox(&a.bbox, quarter_turns * 90)))
                .collect(),
        )),
        AugmentKind::Shear { degrees } => {
            let t = degrees.to_radians().tan();
            let cy = h / 2.0;
            Ok(geometric(img, annots, |x, y| (x + t * (y - cy), y), |u, v| (u - t * (v - cy), v)))
        }
        AugmentKind::Scale { factor } => {
            let f = *factor;
            let (cx, cy) = (w / 2.0, h / 2.0);
            Ok(geometric(
                img,
                annots,
                |x, y| ((x - cx) * f + cx, (y - cy) * f + cy),
                |u, v| ((u - cx) / f + cx, (v - cy) / f + cy),
            ))
        }
        AugmentKind::Translate { dx, dy } => {
            let (ox, oy) = (dx * w, dy * h);
            Ok(geometric(img, annots, |x, y| (x + ox, y + oy), |u, v| (u - ox, v - oy)))
        }
        AugmentKind::Crop { scale } => {
            let cw = ((w * scale).round() as usize).clamp(1, img.width());
            let ch = ((h * scale).round() as usize).clamp(1, img.height());
            let x0 = rng.random_range(0..=img.width() - cw) as f64;
            let y0 = rng.random_range(0..=img.height() - ch) as f64;
            let (sx, sy) = (w / cw as f64, h / ch as f64);
            Ok(geometric(
                img,
                annots,
                |x, y| ((x - x0) * sx, (y - y0) * sy),
                |u, v| (u / sx + x0, v / sy + y0),
            ))
        }
        AugmentKind::Mosaic { partners } => mosaic(img, annots, partners, &mut rng),
    }
}

/// Four tiles at half size meet at a seeded center inside the middle half of
/// the canvas; each tile is anchored at that center and clipped to its
/// quadrant.
fn mosaic(
    img: &Image,
    annots: &[Annotation],
    partners: &[Sample],
    rng: &mut rng::Rng,
) -> Result<(Image, Vec<Annotation>)> {
    let (w, h) = (img.width(), img.height());
    let (tw, th) = ((w / 2).max(1), (h / 2).max(1));
    let xc = rng.random_range(w / 4..=(3 * w / 4)) as i64;
    let yc = rng.random_range(h / 4..=(3 * h / 4)) as i64;
    let origins = [
        (xc - tw as i64, yc - th as i64),
        (xc, yc - th as i64),
        (xc - tw as i64, yc),
        (xc, yc),
    ];
    let mut canvas = Image::filled(w, h, img.channels(), DEFAULT_PAD_VALUE)?;
    let mut boxes = Vec::new();
    let tiles = std::iter::once((img, annots)).chain(partners.iter().map(|s| (&s.image, s.annotations.as_slice())));
    for ((tile, tile_annots), (ox, oy)) in tiles.zip(origins) {
        let tile = if tile.channels() == canvas.channels() { tile.clone() } else { tile.to_rgb() };
        let resized = resize_bilinear(&tile, tw, th)?;
        canvas.blit(&resized, ox, oy);
        let (sx, sy) = (tw as f64 / tile.width() as f64, th as f64 / tile.height() as f64);
        boxes.extend(map_boxes(tile_annots, (tile.width(), tile.height()), (w, h), |x, y| {
            (x * sx + ox as f64, y * sy + oy as f64)
        }));
    }
    Ok((canvas, boxes))
}

/// Applies a stack of operations in order.
pub fn augment_stack(img: &Image, annots: &[Annotation], ops: &[AugmentOp]) -> Result<(Image, Vec<Annotation>)> {
    let mut cur = (img.clone(), annots.to_vec());
    for op in ops {
        cur = augment(&cur.0, &cur.1, op)?;
    }
    Ok(cur)
}

/// Draws a random stack of one to three distinct operations with magnitudes
/// from moderate sampling ranges. Mosaic is only drawn when `pool` holds at
/// least three samples besides the one being augmented (`self_index`).
pub fn random_op_stack(rng: &mut rng::Rng, pool: &[Sample], self_index: usize) -> Vec<AugmentOp> {
    const KINDS: usize = 15;
    let mosaic_ok = pool.len() >= 4;
    let n_ops = rng.random_range(1..=3);
    let mut chosen: Vec<usize> = Vec::with_capacity(n_ops);
    while chosen.len() < n_ops {
        let k = rng.random_range(0..KINDS);
        if chosen.contains(&k) || (k == 14 && !mosaic_ok) {
            continue;
        }
        chosen.push(k);
    }
    chosen
        .into_iter()
        .map(|k| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let kind = match k {
                0 => AugmentKind::Crop { scale: rng.random_range(0.6..0.95) },
                1 => AugmentKind::Rotation90 { quarter_turns: rng.random_range(1..=3) },
                2 => AugmentKind::Shear { degrees: sign * rng.random_range(2.0..15.0) },
                3 => AugmentKind::Grayscale,
                4 => AugmentKind::Hue { degrees: sign * rng.random_range(5.0..25.0) },
                5 => AugmentKind::Saturation { factor: rng.random_range(0.6..1.4) },
                6 => AugmentKind::Brightness { delta: sign * rng.random_range(0.03..0.2) },
                7 => AugmentKind::Exposure { gamma: rng.random_range(0.7..1.4) },
                8 => AugmentKind::Blur { radius: 1 },
                9 => AugmentKind::Noise { sigma: rng.random_range(3.0..12.0) },
                10 => AugmentKind::Cutout { fraction: rng.random_range(0.1..0.3) },
                11 => AugmentKind::Hflip,
                12 => AugmentKind::Scale { factor: rng.random_range(0.7..1.3) },
                13 => AugmentKind::Translate {
                    dx: rng.random_range(-0.2..0.2),
                    dy: rng.random_range(-0.2..0.2),
                },
                _ => {
                    let partners = (0..3)
                        .map(|_| loop {
                            let j = rng.random_range(0..pool.len());
                            if j != self_index {
                                break pool[j].clone();
                            }
                        })
                        .collect();
                    AugmentKind::Mosaic { partners }
                }
            };
            AugmentOp::new(kind, rng.random())
        })
        .collect()
}

/// Per-epoch training stack: random zoom, shift and mirror, then mild
/// color jitter. Every draw comes from `rng`.
pub fn training_op_stack(rng: &mut rng::Rng) -> Vec<AugmentOp> {
    let mut ops = Vec::with_capacity(6);
    let mut push = |kind: AugmentKind, rng: &mut rng::Rng| ops.push(AugmentOp::new(kind, rng.random()));
    if rng.random_bool(0.5) {
        let factor = rng.random_range(0.75..1.25);
        push(AugmentKind::Scale { factor }, rng);
    }
    let (dx, dy) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
    push(AugmentKind::Translate { dx, dy }, rng);
    if rng.random_bool(0.5) {
        push(AugmentKind::Hflip, rng);
    }
    if rng.random_bool(0.5) {
        let degrees = rng.random_range(-10.0..10.0);
        push(AugmentKind::Hue { degrees }, rng);
    }
    if rng.random_bool(0.5) {
        let factor = rng.random_range(0.7..1.3);
        push(AugmentKind::Saturation { factor }, rng);
    }
    if rng.random_bool(0.5) {
        let delta = rng.random_range(-0.1..0.1);
        push(AugmentKind::Brightness { delta }, rng);
    }
    ops
}
