//! Seeded synthetic scenes: gridded solar-cell targets among plain dark
//! look-alikes, with exact ground truth.
//!
//! Scene `i` of seed `s` draws from `rng::stream(s, i)`, so scenes can be
//! generated in any order or in parallel with identical bytes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::datakit::{split_dataset, write_sample, Annotation, DatasetManifest, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::imagery::{box_blur, fill_rect, Image};
use crate::parallel;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Flat,
    Gradient,
    Speckle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    /// Side of the square output image in pixels.
    pub image_size: usize,
    /// Inclusive range of solar cells per scene.
    pub n_cells: [usize; 2],
    /// Inclusive range of plain look-alike rectangles per scene.
    pub n_distractors: [usize; 2],
    /// Side length range of cells and distractors, as a fraction of the image.
    pub cell_size: [f64; 2],
    pub background: Background,
    /// Range of the global brightness multiplier.
    pub lighting: [f64; 2],
    /// Chance that a given cell is partly covered by an occluder.
    pub occlusion_prob: f64,
    /// Chance that a scene is blurred.
    pub blur_prob: f64,
    /// Chance that a given cell shows a specular stripe.
    pub reflection_prob: f64,
    /// Chance that a scene gets a shadow band.
    pub shadow_prob: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            image_size: 128,
            n_cells: [1, 3],
            n_distractors: [0, 2],
            cell_size: [0.15, 0.35],
            background: Background::Gradient,
            lighting: [0.5, 1.2],
            occlusion_prob: 0.2,
            blur_prob: 0.2,
            reflection_prob: 0.3,
            shadow_prob: 0.2,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, message: String| Err(Error::Config { key: key.into(), message });
        if self.image_size < 8 {
            return err("image_size", format!("{} is below the 8-pixel minimum", self.image_size));
        }
        for (key, r) in [("n_cells", self.n_cells), ("n_distractors", self.n_distractors)] {
            if r[0] > r[1] {
                return err(key, format!("empty range [{}, {}]", r[0], r[1]));
            }
        }
        let [lo, hi] = self.cell_size;
        if !(lo > 0.0 && lo <= hi) {
            return err("cell_size", format!("range [{lo}, {hi}] must be non-empty and positive"));
        }
        if hi > 1.0 {
            return err("cell_size", format!("upper bound {hi} makes a cell larger than the image"));
        }
        if (hi * self.image_size as f64).round() < 2.0 {
            return err("cell_size", format!("cells of {hi} × {} px are too small to draw", self.image_size));
        }
        let [l0, l1] = self.lighting;
        if !(l0 > 0.0 && l0 <= l1 && l1.is_finite()) {
            return err("lighting", format!("range [{l0}, {l1}] must be non-empty and positive"));
        }
        for (key, p) in [
            ("occlusion_prob", self.occlusion_prob),
            ("blur_prob", self.blur_prob),
            ("reflection_prob", self.reflection_prob),
            ("shadow_prob", self.shadow_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(key, format!("{p} is not a probability"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn overlaps(&self, o: &Rect, margin: usize) -> bool {
        self.x0 < o.x0 + o.w + margin
            && o.x0 < self.x0 + self.w + margin
            && self.y0 < o.y0 + o.h + margin
            && o.y0 < self.y0 + self.h + margin
    }
}

fn random_rect(r: &mut Rng, p: &SynthParams) -> Rect {
    let n = p.image_size;
    let side = |r: &mut Rng| ((r.random_range(p.cell_size[0]..=p.cell_size[1]) * n as f64).round() as usize).clamp(2, n);
    let (w, h) = (side(r), side(r));
    Rect {
        x0: r.random_range(0..=n - w),
        y0: r.random_range(0..=n - h),
        w,
        h,
    }
}

const PLACEMENT_TRIES: usize = 200;

fn shade(rgb: [u8; 3], k: f64) -> [u8; 3] {
    rgb.map(|v| (v as f64 * k).round().clamp(0.0, 255.0) as u8)
}

fn blend(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    std::array::from_fn(|i| (a[i] as f64 * (1.0 - t) + b[i] as f64 * t).round() as u8)
}

fn random_color(r: &mut Rng, lo: u8, hi: u8) -> [u8; 3] {
    std::array::from_fn(|_| r.random_range(lo..=hi))
}

fn paint_background(img: &mut Image, r: &mut Rng, kind: Background) {
    let n = img.width();
    let a = random_color(r, 90, 220);
    match kind {
        Background::Flat => {
            fill_rect(img, 0, 0, n, n, &a);
        }
        Background::Gradient => {
            let b = random_color(r, 90, 220);
            let angle = r.random_range(0.0..std::f64::consts::TAU);
            let (dx, dy) = (angle.cos(), angle.sin());
            for y in 0..n {
                for x in 0..n {
                    let u = ((x as f64 / n as f64 - 0.5) * dx + (y as f64 / n as f64 - 0.5) * dy) / std::f64::consts::SQRT_2 + 0.5;
                    img.pixel_mut(x, y).copy_from_slice(&blend(a, b, u.clamp(0.0, 1.0)));
                }
            }
        }
        Background::Speckle => {
            for y in 0..n {
                for x in 0..n {
                    let k = 1.0 + r.random_range(-0.15..=0.15);
                    img.pixel_mut(x, y).copy_from_slice(&shade(a, k));
                }
            }
        }
    }
}

/// Dark panel crossed by light wire lines on a regular pitch, framed by a
/// light border.
fn paint_cell(img: &mut Image, r: &mut Rng, rect: Rect, reflection: bool) {
    let fill = [r.random_range(15..=45), r.random_range(25..=60), r.random_range(70..=130)];
    let wire = random_color(r, 160, 215);
    let pitch = r.random_range(5..=9);
    let Rect { x0, y0, w, h } = rect;
    fill_rect(img, x0, y0, x0 + w, y0 + h, &fill);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            let (dx, dy) = (x - x0, y - y0);
            let border = dx == 0 || dy == 0 || dx == w - 1 || dy == h - 1;
            if border || dx % pitch == 0 || dy % pitch == 0 {
                img.pixel_mut(x, y).copy_from_slice(&wire);
            }
        }
    }
    if reflection {
        // diagonal glare band across the panel
        let offset = r.random_range(0.2..0.8) * (w + h) as f64;
        let half_width = r.random_range(0.04..0.1) * (w + h) as f64;
        let strength = r.random_range(0.4..0.7);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                let d = ((x - x0) + (y - y0)) as f64 - offset;
                if d.abs() < half_width {
                    let px = img.pixel_mut(x, y);
                    let lit = blend([px[0], px[1], px[2]], [255, 255, 255], strength);
                    px.copy_from_slice(&lit);
                }
            }
        }
    }
}

/// Covers one edge region of `rect` with a plain block.
fn paint_occluder(img: &mut Image, r: &mut Rng, rect: Rect) {
    let n = img.width();
    let color = random_color(r, 100, 230);
    let frac = r.random_range(0.15..0.4);
    let Rect { x0, y0, w, h } = rect;
    let (ow, oh) = (((w as f64 * frac).ceil() as usize).max(1), ((h as f64 * frac).ceil() as usize).max(1));
    let (ax, ay, bx, by) = match r.random_range(0..4) {
        0 => (x0.saturating_sub(ow / 2), y0, x0 + ow, y0 + h),
        1 => ((x0 + w).saturating_sub(ow), y0, x0 + w + ow / 2, y0 + h),
        2 => (x0, y0.saturating_sub(oh / 2), x0 + w, y0 + oh),
        _ => (x0, (y0 + h).saturating_sub(oh), x0 + w, y0 + h + oh / 2),
    };
    fill_rect(img, ax, ay, bx.min(n), by.min(n), &color);
}

fn apply_gain(img: &mut Image, gain: impl Fn(usize, usize) -> f64) {
    let n = img.width();
    for y in 0..n {
        for x in 0..n {
            let g = gain(x, y);
            for v in img.pixel_mut(x, y) {
                *v = (*v as f64 * g).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
}

/// Renders scene `index`: background, distractors, cells (with optional
/// glare and occluders), then shadow, lighting and blur. Annotations are the
/// full pixel-aligned extents of the cells, class 0, including any part an
/// occluder hides.
pub fn generate_scene(params: &SynthParams, index: u64) -> Result<(Image, Vec<Annotation>)> {
    params.validate()?;
    let mut r = rng::stream(params.seed, index);
    let n = params.image_size;
    let mut img = Image::filled(n, n, 3, 0)?;
    paint_background(&mut img, &mut r, params.background);

    let n_cells = r.random_range(params.n_cells[0]..=params.n_cells[1]);
    let n_distractors = r.random_range(params.n_distractors[0]..=params.n_distractors[1]);
    let mut cells: Vec<Rect> = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let mut rect = random_rect(&mut r, params);
        for _ in 0..PLACEMENT_TRIES {
            if cells.iter().all(|c| !c.overlaps(&rect, 2)) {
                break;
            }
            rect = random_rect(&mut r, params);
        }
        // a crowded scene may end up with overlapping panels; the count is kept
        cells.push(rect);
    }
    let mut distractors: Vec<Rect> = Vec::with_capacity(n_distractors);
    for _ in 0..n_distractors {
        let placed = (0..PLACEMENT_TRIES)
            .map(|_| random_rect(&mut r, params))
            .find(|d| cells.iter().chain(&distractors).all(|c| !c.overlaps(d, 2)));
        if let Some(d) = placed {
            distractors.push(d);
        }
    }

    for d in &distractors {
        let fill = random_color(&mut r, 10, 50);
        fill_rect(&mut img, d.x0, d.y0, d.x0 + d.w, d.y0 + d.h, &fill);
    }
    for c in &cells {
        let reflection = r.random_bool(params.reflection_prob);
        paint_cell(&mut img, &mut r, *c, reflection);
    }
    for c in &cells {
        if r.random_bool(params.occlusion_prob) {
            paint_occluder(&mut img, &mut r, *c);
        }
    }
    if r.random_bool(params.shadow_prob) {
        // soft-edged band darkened to 40–70 %
        let depth = r.random_range(0.4..0.7);
        let angle = r.random_range(0.0..std::f64::consts::TAU);
        let (dx, dy) = (angle.cos(), angle.sin());
        let edge = r.random_range(-0.3..0.3);
        apply_gain(&mut img, |x, y| {
            let u = (x as f64 / n as f64 - 0.5) * dx + (y as f64 / n as f64 - 0.5) * dy - edge;
            let t = (u * 10.0).clamp(0.0, 1.0);
            1.0 - (1.0 - depth) * t
        });
    }
    let lighting = r.random_range(params.lighting[0]..=params.lighting[1]);
    apply_gain(&mut img, |_, _| lighting);
    if r.random_bool(params.blur_prob) {
        img = box_blur(&img, 1);
    }

    let nf = n as f64;
    let annotations = cells
        .iter()
        .map(|c| {
            let bbox = BBox {
                cx: (c.x0 as f64 + c.w as f64 / 2.0) / nf,
                cy: (c.y0 as f64 + c.h as f64 / 2.0) / nf,
                w: c.w as f64 / nf,
                h: c.h as f64 / nf,
            };
            Annotation::new(0, bbox)
        })
        .collect();
    Ok((img, annotations))
}

/// Writes `n_images` scenes in the dataset layout and a seeded train/test
/// split. The manifest records the generator parameters.
pub fn generate_dataset(
    params: &SynthParams,
    n_images: usize,
    out_root: impl AsRef<std::path::Path>,
    train_fraction: f64,
    threads: usize,
) -> Result<DatasetManifest> {
    params.validate()?;
    if n_images < 2 {
        return Err(Error::Argument(format!("need at least 2 images, got {n_images}")));
    }
    let root = out_root.as_ref();
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let entries = parallel::map_indexed(n_images, threads, |i| {
        let (img, annots) = generate_scene(params, i as u64)?;
        let (image, label) = write_sample(root, &format!("synth_{i:05}"), &img, &annots)?;
        Ok::<_, Error>(ManifestEntry { image, label, split: Split::Train, orient: 0 })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let split_seed = rng::derive_seed(params.seed, u64::MAX);
    let mut manifest = split_dataset(entries, vec!["solar_cell".into()], root, train_fraction, split_seed)?;
    manifest.config = Some(serde_json::json!({
        "generator": params,
        "n_images": n_images,
        "train_fraction": train_fraction,
    }));
    manifest.save()?;
    Ok(manifest)
}
