//! Oracles shared by integration tests.
#![allow(dead_code)]

use heliodet::datakit::{augment, Annotation, AugmentKind, AugmentOp, Sample};
use heliodet::geometry::BBox;
use heliodet::imagery::Image;
use rand::Rng;

pub const ORACLE_SIZE: usize = 128;
pub const ORACLE_TOLERANCE_PX: f64 = 1.5;

/// Tight pixel bbox `[x1, y1, x2, y2)` of pixels with a first channel ≥ 128.
pub fn mask_bbox(img: &Image) -> Option<[f64; 4]> {
    let mut b: Option<[usize; 4]> = None;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.pixel(x, y)[0] >= 128 {
                let e = b.get_or_insert([x, y, x, y]);
                e[0] = e[0].min(x);
                e[1] = e[1].min(y);
                e[2] = e[2].max(x);
                e[3] = e[3].max(y);
            }
        }
    }
    b.map(|[x1, y1, x2, y2]| [x1 as f64, y1 as f64, (x2 + 1) as f64, (y2 + 1) as f64])
}

pub fn geometric_kind(name: &str, r: &mut impl Rng) -> AugmentKind {
    let blank = || Sample {
        image: Image::filled(ORACLE_SIZE, ORACLE_SIZE, 3, 0).unwrap(),
        annotations: vec![],
    };
    match name {
        "crop" => AugmentKind::Crop { scale: r.random_range(0.5..0.95) },
        "rotation90" => AugmentKind::Rotation90 { quarter_turns: r.random_range(1..=3) },
        "shear" => AugmentKind::Shear { degrees: r.random_range(-20.0..=20.0) },
        "hflip" => AugmentKind::Hflip,
        "scale" => AugmentKind::Scale { factor: r.random_range(0.5..1.5) },
        "translate" => AugmentKind::Translate { dx: r.random_range(-0.3..=0.3), dy: r.random_range(-0.3..=0.3) },
        "mosaic" => AugmentKind::Mosaic { partners: vec![blank(), blank(), blank()] },
        other => panic!("not a geometric op: {other}"),
    }
}

pub const GEOMETRIC_OPS: [&str; 7] = ["crop", "rotation90", "shear", "hflip", "scale", "translate", "mosaic"];

/// Outcome of one rasterization-oracle case.
pub enum OracleCase {
    /// Largest corner error in pixels between the emitted box and the tight
    /// bbox of the transformed mask.
    Compared(f64),
    /// Box dropped by the visibility rule.
    Dropped,
}

/// Renders a seeded white rectangle on black, applies the op, and compares
/// the emitted box with the tight bbox of the transformed mask.
pub fn rasterization_case(op_name: &str, seed: u64) -> OracleCase {
    let mut r = heliodet::rng::stream(seed, 7);
    let n = ORACLE_SIZE;
    let (w, h) = (r.random_range(12..48), r.random_range(12..48));
    let (x0, y0) = (r.random_range(8..n - 8 - w), r.random_range(8..n - 8 - h));
    let mut img = Image::filled(n, n, 3, 0).unwrap();
    heliodet::imagery::fill_rect(&mut img, x0, y0, x0 + w, y0 + h, &[255, 255, 255]);
    let nf = n as f64;
    let bbox = BBox {
        cx: (x0 as f64 + w as f64 / 2.0) / nf,
        cy: (y0 as f64 + h as f64 / 2.0) / nf,
        w: w as f64 / nf,
        h: h as f64 / nf,
    };
    let op = AugmentOp::new(geometric_kind(op_name, &mut r), r.random());
    let (out, boxes) = augment(&img, &[Annotation::new(0, bbox)], &op).unwrap();
    let Some(b) = boxes.first() else {
        return OracleCase::Dropped;
    };
    let (ow, oh) = (out.width() as f64, out.height() as f64);
    let c = b.bbox.to_corners();
    let emitted = [c.x1 * ow, c.y1 * oh, c.x2 * ow, c.y2 * oh];
    let raster = mask_bbox(&out).expect("a kept box has visible pixels");
    let err = emitted.iter().zip(&raster).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    OracleCase::Compared(err)
}

/// Worst corner error of an op over `seeds` seeds and the number of cases
/// actually compared.
pub fn rasterization_suite(op_name: &str, seeds: u64) -> (f64, usize) {
    let mut worst = 0f64;
    let mut compared = 0;
    for seed in 0..seeds {
        if let OracleCase::Compared(e) = rasterization_case(op_name, seed) {
            worst = worst.max(e);
            compared += 1;
        }
    }
    (worst, compared)
}
