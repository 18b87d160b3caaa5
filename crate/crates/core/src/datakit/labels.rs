//! Darknet TXT labels: one `class cx cy w h` line per object, coordinates
//! normalized to the image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// A ground-truth object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class_id: usize,
    pub bbox: BBox,
}

impl Annotation {
    pub fn new(class_id: usize, bbox: BBox) -> Self {
        Self { class_id, bbox }
    }
}

/// Parses label text. Blank lines are skipped; anything else must be a
/// well-formed object line.
pub fn parse_label_file(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Label { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let class_id: usize = fields[0]
            .parse()
            .map_err(|_| err(format!("class id {:?} is not a non-negative integer", fields[0])))?;
        let mut v = [0f64; 4];
        for (slot, (name, text)) in v.iter_mut().zip(["cx", "cy", "w", "h"].into_iter().zip(&fields[1..])) {
            let x: f64 = text
                .parse()
                .map_err(|_| err(format!("{name} {text:?} is not a number")))?;
            if !x.is_finite() {
                return Err(err(format!("{name} is not finite")));
            }
            *slot = x;
        }
        let bbox = BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| match e {
            Error::Argument(m) => err(m),
            other => other,
        })?;
        out.push(Annotation { class_id, bbox });
    }
    Ok(out)
}

/// Canonical text: six decimals, single spaces, LF line ends.
pub fn write_label_file(annots: &[Annotation]) -> String {
    annots
        .iter()
        .map(|a| {
            format!(
                "{} {:.6} {:.6} {:.6} {:.6}\n",
                a.class_id, a.bbox.cx, a.bbox.cy, a.bbox.w, a.bbox.h
            )
        })
        .collect()
}
