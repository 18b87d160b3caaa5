//! Bilinear resampling and aspect-preserving letterboxing.

use super::Image;
use crate::error::{Error, Result};

/// Mid-gray used for letterbox borders and cutout patches.
pub const DEFAULT_PAD_VALUE: u8 = 114;

/// Bilinear resize with half-pixel-center sampling.
///
/// Source coordinates are `(x + 0.5) * src / dst - 0.5`, clamped to the
/// image; results are rounded half away from zero so output bytes are
/// reproducible everywhere.
pub fn resize_bilinear(img: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Argument(format!(
            "resize target must be positive, got {new_w}x{new_h}"
        )));
    }
    if new_w == img.width() && new_h == img.height() {
        return Ok(img.clone());
    }
    let (sw, sh, c) = (img.width(), img.height(), img.channels());
    let taps = |dst: usize, src: usize| -> Vec<(usize, usize, f64)> {
        let ratio = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let s = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = taps(new_w, sw);
    let ys = taps(new_h, sh);
    let src = img.data();
    let mut out = vec![0u8; new_w * new_h * c];
    for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            for ch in 0..c {
                let p = |xx: usize, yy: usize| src[(yy * sw + xx) * c + ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[(y * new_w + x) * c + ch] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Image::new(new_w, new_h, c, out)
}

/// Mapping between a source image and its letterboxed version.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LetterboxTransform {
    pub scale: f64,
    pub pad_x: usize,
    pub pad_y: usize,
    pub src_w: usize,
    pub src_h: usize,
    pub dst_w: usize,
    pub dst_h: usize,
}

impl LetterboxTransform {
    pub fn new(src_w: usize, src_h: usize, dst_w: usize, dst_h: usize) -> Self {
        let scale = (dst_w as f64 / src_w as f64).min(dst_h as f64 / src_h as f64);
        let (cw, ch) = Self::content_size_for(src_w, src_h, dst_w, dst_h, scale);
        Self {
            scale,
            pad_x: (dst_w - cw) / 2,
            pad_y: (dst_h - ch) / 2,
            src_w,
            src_h,
            dst_w,
            dst_h,
        }
    }

    fn content_size_for(
        src_w: usize,
        src_h: usize,
        dst_w: usize,
        dst_h: usize,
        scale: f64,
    ) -> (usize, usize) {
        let cw = ((src_w as f64 * scale).round() as usize).clamp(1, dst_w);
        let ch = ((src_h as f64 * scale).round() as usize).clamp(1, dst_h);
        (cw, ch)
    }

    /// Size of the resized image region inside the padded canvas.
    pub fn content_size(&self) -> (usize, usize) {
        Self::content_size_for(self.src_w, self.src_h, self.dst_w, self.dst_h, self.scale)
    }

    /// Source pixel coordinates to destination pixel coordinates.
    pub fn forward_point(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x * self.scale + self.pad_x as f64,
            y * self.scale + self.pad_y as f64,
        )
    }

    /// Destination pixel coordinates back to source pixel coordinates.
    pub fn inverse_point(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.pad_x as f64) / self.scale,
            (y - self.pad_y as f64) / self.scale,
        )
    }

    /// Maps a corner box `[x1, y1, x2, y2]` from source to destination pixels.
    pub fn forward_box(&self, b: [f64; 4]) -> [f64; 4] {
        let (x1, y1) = self.forward_point(b[0], b[1]);
        let (x2, y2) = self.forward_point(b[2], b[3]);
        [x1, y1, x2, y2]
    }

    /// Maps a corner box from destination back to source pixels.
    pub fn inverse_box(&self, b: [f64; 4]) -> [f64; 4] {
        let (x1, y1) = self.inverse_point(b[0], b[1]);
        let (x2, y2) = self.inverse_point(b[2], b[3]);
        [x1, y1, x2, y2]
    }
}

/// Resizes preserving aspect ratio and pads to exactly `dst_w`×`dst_h`,
/// centering the content.
pub fn letterbox(
    img: &Image,
    dst_w: usize,
    dst_h: usize,
    pad_value: u8,
) -> Result<(Image, LetterboxTransform)> {
    if dst_w == 0 || dst_h == 0 {
        return Err(Error::Argument(format!(
            "letterbox target must be positive, got {dst_w}x{dst_h}"
        )));
    }
    let t = LetterboxTransform::new(img.width(), img.height(), dst_w, dst_h);
    let (cw, ch) = t.content_size();
    let content = resize_bilinear(img, cw, ch)?;
    if cw == dst_w && ch == dst_h {
        return Ok((content, t));
    }
    let mut canvas = Image::filled(dst_w, dst_h, img.channels(), pad_value)?;
    canvas.blit(&content, t.pad_x as i64, t.pad_y as i64);
    Ok((canvas, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_size_is_identity() {
        let img = Image::new(3, 2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(resize_bilinear(&img, 3, 2).unwrap(), img);
    }

    #[test]
    fn upsampling_monotone_row_stays_monotone() {
        let img = Image::new(2, 1, 1, vec![0, 200]).unwrap();
        let out = resize_bilinear(&img, 4, 1).unwrap();
        assert!(out.data().windows(2).all(|w| w[0] <= w[1]), "{:?}", out.data());
        assert_eq!(out.data(), &[0, 50, 150, 200]);
    }

    #[test]
    fn checkerboard_average_rounds_half_away_from_zero() {
        let img = Image::new(2, 2, 1, vec![0, 255, 255, 0]).unwrap();
        let out = resize_bilinear(&img, 1, 1).unwrap();
        // four-tap mean is 127.5
        assert_eq!(out.data(), &[128]);
    }

    #[test]
    fn zero_target_is_an_error() {
        let img = Image::filled(2, 2, 1, 0).unwrap();
        assert!(matches!(resize_bilinear(&img, 0, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn phone_photo_letterbox_geometry() {
        let t = LetterboxTransform::new(4032, 3024, 640, 640);
        assert!((t.scale - 640.0 / 4032.0).abs() < 1e-15);
        assert_eq!(t.content_size(), (640, 480));
        assert_eq!((t.pad_x, t.pad_y), (0, 80));
    }

    #[test]
    fn letterbox_pads_with_value() {
        let img = Image::filled(8, 4, 3, 10).unwrap();
        let (out, t) = letterbox(&img, 8, 8, DEFAULT_PAD_VALUE).unwrap();
        assert_eq!((out.width(), out.height()), (8, 8));
        assert_eq!((t.pad_x, t.pad_y), (0, 2));
        assert_eq!(out.pixel(0, 0), &[114, 114, 114]);
        assert_eq!(out.pixel(3, 4), &[10, 10, 10]);
        assert_eq!(out.pixel(7, 7), &[114, 114, 114]);
    }

    #[test]
    fn square_source_is_pure_resize() {
        let img = Image::filled(10, 10, 1, 77).unwrap();
        let (out, t) = letterbox(&img, 5, 5, 0).unwrap();
        assert_eq!((t.pad_x, t.pad_y), (0, 0));
        assert_eq!(out, resize_bilinear(&img, 5, 5).unwrap());
    }

    proptest! {
        #[test]
        fn constant_images_survive_resize(w in 1usize..20, h in 1usize..20, nw in 1usize..30, nh in 1usize..30, v in any::<u8>()) {
            let img = Image::filled(w, h, 3, v).unwrap();
            let out = resize_bilinear(&img, nw, nh).unwrap();
            prop_assert!(out.data().iter().all(|&p| p == v));
        }

        #[test]
        fn letterbox_output_has_requested_size(w in 1usize..60, h in 1usize..60, dw in 1usize..50, dh in 1usize..50) {
            let img = Image::filled(w, h, 1, 3).unwrap();
            let (out, t) = letterbox(&img, dw, dh, 0).unwrap();
            prop_assert_eq!((out.width(), out.height()), (dw, dh));
            let (cw, ch) = t.content_size();
            prop_assert!(cw + 2 * t.pad_x <= dw && ch + 2 * t.pad_y <= dh);
        }

        #[test]
        fn box_roundtrip_within_one_pixel(
            w in 20usize..5000, h in 20usize..5000,
            x1 in 0.0f64..0.5, y1 in 0.0f64..0.5, bw in 0.01f64..0.5, bh in 0.01f64..0.5,
        ) {
            let t = LetterboxTransform::new(w, h, 640, 640);
            let b = [x1 * w as f64, y1 * h as f64, (x1 + bw) * w as f64, (y1 + bh) * h as f64];
            let dst = t.forward_box(b).map(|v| v.round());
            let back = t.inverse_box(dst);
            // one destination pixel expressed in source pixels
            let tol = 1.0 / t.scale;
            for (a, b) in back.iter().zip(b.iter()) {
                prop_assert!((a - b).abs() <= tol, "{a} vs {b}");
            }
        }
    }
}
