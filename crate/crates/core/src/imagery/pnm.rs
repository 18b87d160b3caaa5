//! Binary PPM (P6) and PGM (P5) with maxval 255.
//!
//! Writing always produces the canonical header `P6\n{w} {h}\n255\n` (or
//! `P5`) followed by the raw samples. Reading accepts any whitespace between
//! header fields and `#` comment lines, as the netpbm format allows.

use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

fn decode_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Decode {
        offset,
        message: message.into(),
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(decode_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_err(start, format!("{what} out of range")))
    }
}

/// Decodes a binary PPM or PGM file.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(decode_err(0, "file too short for a magic number"));
    }
    let channels = match &bytes[..2] {
        b"P6" => 3,
        b"P5" => 1,
        _ => return Err(decode_err(0, "bad magic, expected P6 or P5")),
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval_at = {
        rd.skip_whitespace_and_comments();
        rd.pos
    };
    let maxval = rd.number("maxval")?;
    if maxval != 255 {
        return Err(decode_err(
            maxval_at,
            format!("maxval {maxval} unsupported, only 255"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(decode_err(2, "zero image dimension"));
    }
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(decode_err(rd.pos, "expected a single whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| decode_err(2, "image dimensions overflow"))?;
    let data = &bytes[rd.pos..];
    if data.len() < need {
        return Err(decode_err(
            bytes.len(),
            format!("truncated pixel data: {} of {need} bytes", data.len()),
        ));
    }
    if data.len() > need {
        return Err(decode_err(rd.pos + need, "trailing bytes after pixel data"));
    }
    Image::new(width, height, channels, data.to_vec())
}

/// Encodes to the canonical binary form.
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.data());
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn write_ppm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_rgb_file() {
        let mut f = b"P6\n1 1\n255\n".to_vec();
        f.extend_from_slice(&[10, 20, 30]);
        let img = decode_ppm(&f).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (1, 1, 3));
        assert_eq!(img.pixel(0, 0), &[10, 20, 30]);
    }

    #[test]
    fn gray_file() {
        let mut f = b"P5\n2 1\n255\n".to_vec();
        f.extend_from_slice(&[0, 255]);
        let img = decode_ppm(&f).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 1, 1));
        assert_eq!(img.data(), &[0, 255]);
    }

    #[test]
    fn black_pixel_encodes_to_header_plus_three_bytes() {
        let img = Image::filled(1, 1, 3, 0).unwrap();
        let bytes = encode_ppm(&img);
        assert_eq!(bytes.len(), 11 + 3);
        assert_eq!(&bytes[..11], b"P6\n1 1\n255\n");
    }

    #[test]
    fn comments_are_tolerated() {
        let mut f = b"P5\n# made by hand\n2 # width\n1\n255\n".to_vec();
        f.extend_from_slice(&[1, 2]);
        assert_eq!(decode_ppm(&f).unwrap().data(), &[1, 2]);
    }

    #[test]
    fn errors_name_offsets() {
        match decode_ppm(b"P3\n1 1\n255\n\0\0\0") {
            Err(Error::Decode { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
        match decode_ppm(b"P6\n1 1\n65535\n\0\0\0") {
            Err(Error::Decode { offset: 7, .. }) => {}
            other => panic!("{other:?}"),
        }
        match decode_ppm(b"P6\n2 1\n255\n\0\0\0") {
            Err(Error::Decode { offset: 14, message }) => assert!(message.contains("truncated")),
            other => panic!("{other:?}"),
        }
        assert!(decode_ppm(b"P6\nx 1\n255\n").is_err());
    }

    proptest! {
        #[test]
        fn canonical_roundtrip(w in 1usize..9, h in 1usize..9, gray in any::<bool>(), seed in any::<u64>()) {
            let c = if gray { 1 } else { 3 };
            let data = (0..w * h * c).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
            let img = Image::new(w, h, c, data).unwrap();
            let bytes = encode_ppm(&img);
            let back = decode_ppm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(encode_ppm(&back), bytes);
        }
    }
}
