//! Owned 8-bit images, the PPM/PGM codec, resampling, and pixel operations.

mod color;
mod pnm;
mod resample;

pub use color::{
    adjust_brightness, adjust_exposure, adjust_hue, adjust_saturation, box_blur, fill_rect,
    grayscale, hsv_to_rgb, rgb_to_hsv,
};
pub use pnm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
pub use resample::{letterbox, resize_bilinear, LetterboxTransform, DEFAULT_PAD_VALUE};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved 8-bit image with one (gray) or three (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Argument(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::Argument(format!(
                "pixel buffer holds {} bytes, {width}x{height}x{channels} needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// RGB image with every pixel set to `rgb`.
    pub fn from_rgb_fill(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    /// Samples of the pixel at column `x`, row `y`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let o = self.offset(x, y);
        let c = self.channels;
        &mut self.data[o..o + c]
    }

    /// Converts a gray image to RGB by replication; RGB images are returned unchanged.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Rotates clockwise by `quarter_turns` × 90°.
    pub fn rotate90(&self, quarter_turns: u32) -> Image {
        let turns = quarter_turns % 4;
        if turns == 0 {
            return self.clone();
        }
        let (w, h, c) = (self.width, self.height, self.channels);
        let (nw, nh) = if turns % 2 == 1 { (h, w) } else { (w, h) };
        let mut out = vec![0u8; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = match turns {
                    1 => (h - 1 - y, x),
                    2 => (w - 1 - x, h - 1 - y),
                    _ => (y, w - 1 - x),
                };
                let src = (y * w + x) * c;
                let dst = (ny * nw + nx) * c;
                out[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
            }
        }
        Image {
            width: nw,
            height: nh,
            channels: c,
            data: out,
        }
    }

    /// Mirrors left to right.
    pub fn flip_horizontal(&self) -> Image {
        let mut out = self.clone();
        let c = self.channels;
        for y in 0..self.height {
            for x in 0..self.width {
                let src = self.offset(self.width - 1 - x, y);
                let dst = self.offset(x, y);
                out.data[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
            }
        }
        out
    }

    /// Copies `src` into this image with its top-left corner at (`x0`, `y0`),
    /// clipping whatever falls outside. Channel counts must agree.
    pub fn blit(&mut self, src: &Image, x0: i64, y0: i64) {
        debug_assert_eq!(self.channels, src.channels);
        let c = self.channels;
        for sy in 0..src.height {
            let ty = y0 + sy as i64;
            if ty < 0 || ty >= self.height as i64 {
                continue;
            }
            for sx in 0..src.width {
                let tx = x0 + sx as i64;
                if tx < 0 || tx >= self.width as i64 {
                    continue;
                }
                let s = src.offset(sx, sy);
                let d = self.offset(tx as usize, ty as usize);
                self.data[d..d + c].copy_from_slice(&src.data[s..s + c]);
            }
        }
    }

    /// Pixels as planar `[channels, height, width]` floats scaled to [0, 1].
    pub fn to_planar_f32(&self) -> Vec<f32> {
        let (w, h, c) = (self.width, self.height, self.channels);
        let mut out = vec![0f32; w * h * c];
        for (i, px) in self.data.chunks_exact(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                out[ch * w * h + i] = v as f32 / 255.0;
            }
        }
        out
    }
}
