//! Per-pixel color operations. All results are rounded half away from zero
//! and clamped to [0, 255]. Gray images are left untouched by the hue and
//! saturation operations.

use super::Image;

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// ITU-R BT.601 luma, replicated into every channel.
pub fn grayscale(img: &Image) -> Image {
    let mut out = img.clone();
    if img.channels() == 1 {
        return out;
    }
    for px in out.data_mut().chunks_exact_mut(3) {
        let y = quantize(0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64);
        px.fill(y);
    }
    out
}

/// RGB in [0, 255] to (hue in degrees [0, 360), saturation [0, 1], value [0, 1]).
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0);
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0).rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r, g, b].map(|u| quantize((u + m) * 255.0))
}

fn map_hsv(img: &Image, f: impl Fn(f64, f64, f64) -> (f64, f64, f64)) -> Image {
    let mut out = img.clone();
    if img.channels() != 3 {
        return out;
    }
    for px in out.data_mut().chunks_exact_mut(3) {
        let (h, s, v) = rgb_to_hsv([px[0], px[1], px[2]]);
        let (h, s, v) = f(h, s, v);
        px.copy_from_slice(&hsv_to_rgb(h, s.clamp(0.0, 1.0), v.clamp(0.0, 1.0)));
    }
    out
}

/// Rotates hue by `degrees`.
pub fn adjust_hue(img: &Image, degrees: f64) -> Image {
    map_hsv(img, |h, s, v| (h + degrees, s, v))
}

/// Multiplies saturation by `factor`.
pub fn adjust_saturation(img: &Image, factor: f64) -> Image {
    map_hsv(img, |h, s, v| (h, s * factor, v))
}

/// Adds `delta` × 255 to every sample.
pub fn adjust_brightness(img: &Image, delta: f64) -> Image {
    let shift = delta * 255.0;
    let mut out = img.clone();
    out.data_mut()
        .iter_mut()
        .for_each(|v| *v = quantize(*v as f64 + shift));
    out
}

/// Gamma curve `255 · (v / 255)^gamma`; gamma < 1 brightens.
pub fn adjust_exposure(img: &Image, gamma: f64) -> Image {
    let lut: Vec<u8> = (0..=255u32)
        .map(|v| quantize(255.0 * (v as f64 / 255.0).powf(gamma)))
        .collect();
    let mut out = img.clone();
    out.data_mut().iter_mut().for_each(|v| *v = lut[*v as usize]);
    out
}

/// Separable box blur of the given radius with edge clamping.
pub fn box_blur(img: &Image, radius: usize) -> Image {
    if radius == 0 {
        return img.clone();
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let r = radius as i64;
    let n = (2 * radius + 1) as f64;
    let pass = |src: &[u8], horizontal: bool| -> Vec<u8> {
        let mut dst = vec![0u8; src.len()];
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut acc = 0u32;
                    for k in -r..=r {
                        let (sx, sy) = if horizontal {
                            ((x as i64 + k).clamp(0, w as i64 - 1) as usize, y)
                        } else {
                            (x, (y as i64 + k).clamp(0, h as i64 - 1) as usize)
                        };
                        acc += src[(sy * w + sx) * c + ch] as u32;
                    }
                    dst[(y * w + x) * c + ch] = quantize(acc as f64 / n);
                }
            }
        }
        dst
    };
    let tmp = pass(img.data(), true);
    let data = pass(&tmp, false);
    Image::new(w, h, c, data).expect("blur preserves dimensions")
}

/// Sets the half-open pixel rectangle `[x0, x1) × [y0, y1)` to `value`,
/// clipped to the image.
pub fn fill_rect(img: &mut Image, x0: usize, y0: usize, x1: usize, y1: usize, value: &[u8]) {
    let x1 = x1.min(img.width());
    let y1 = y1.min(img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            let px = img.pixel_mut(x, y);
            if value.len() == px.len() {
                px.copy_from_slice(value);
            } else {
                px.fill(value[0]);
            }
        }
    }
}
