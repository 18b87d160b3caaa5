//! Grid encodings: raw network predictions and training targets.

use crate::datakit::Annotation;
use crate::geometry::BBox;

use super::DetectorConfig;

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Raw network output viewed as an S×S grid. Cell `(row, col)` holds B
/// slots of `(tx, ty, tw, th, obj)` followed by C class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTensor {
    pub grid_size: usize,
    pub boxes_per_cell: usize,
    pub num_classes: usize,
    pub data: Vec<f32>,
}

/// One slot decoded to image-normalized geometry and probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedSlot {
    pub bbox: BBox,
    pub objectness: f64,
}

impl PredictionTensor {
    pub fn new(cfg: &DetectorConfig, data: Vec<f32>) -> crate::Result<Self> {
        if data.len() != cfg.output_len() {
            return Err(crate::Error::shape(
                "prediction tensor",
                format!("expected {} values, got {}", cfg.output_len(), data.len()),
            ));
        }
        Ok(Self {
            grid_size: cfg.grid_size,
            boxes_per_cell: cfg.boxes_per_cell,
            num_classes: cfg.num_classes,
            data,
        })
    }

    fn cell_len(&self) -> usize {
        self.boxes_per_cell * 5 + self.num_classes
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let n = self.cell_len();
        let i = (row * self.grid_size + col) * n;
        &self.data[i..i + n]
    }

    pub fn slot(&self, row: usize, col: usize, k: usize) -> [f32; 5] {
        let c = self.cell(row, col);
        c[k * 5..k * 5 + 5].try_into().expect("five fields")
    }

    pub fn class_logits(&self, row: usize, col: usize) -> &[f32] {
        &self.cell(row, col)[self.boxes_per_cell * 5..]
    }

    /// Decodes slot `k` of cell `(row, col)`: center from sigmoid offsets,
    /// size from sigmoid (direct) or `anchor · exp(t)`.
    pub fn decode_slot(&self, row: usize, col: usize, k: usize, anchors: Option<&[[f64; 2]]>) -> DecodedSlot {
        let [tx, ty, tw, th, to] = self.slot(row, col, k).map(f64::from);
        let s = self.grid_size as f64;
        let (w, h) = match anchors {
            Some(a) => (a[k][0] * tw.exp(), a[k][1] * th.exp()),
            None => (sigmoid(tw), sigmoid(th)),
        };
        DecodedSlot {
            bbox: BBox {
                cx: (col as f64 + sigmoid(tx)) / s,
                cy: (row as f64 + sigmoid(ty)) / s,
                w,
                h,
            },
            objectness: sigmoid(to),
        }
    }
}

/// Ground truth assigned to one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTarget {
    /// Center offset within the cell, in [0, 1).
    pub offset_x: f64,
    pub offset_y: f64,
    pub w: f64,
    pub h: f64,
    pub class_id: usize,
}

impl CellTarget {
    /// Image-normalized box of this target in cell `(row, col)`.
    pub fn bbox(&self, row: usize, col: usize, grid_size: usize) -> BBox {
        let s = grid_size as f64;
        BBox {
            cx: (col as f64 + self.offset_x) / s,
            cy: (row as f64 + self.offset_y) / s,
            w: self.w,
            h: self.h,
        }
    }
}

/// Training target: at most one object per cell. The responsible slot of
/// an occupied cell is chosen by the loss (best IoU with the prediction);
/// every other slot, and every slot of an empty cell, has objectness 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTensor {
    pub grid_size: usize,
    pub boxes_per_cell: usize,
    pub num_classes: usize,
    pub cells: Vec<Option<CellTarget>>,
    /// Objects dropped because their cell was already taken.
    pub dropped: usize,
}

impl TargetTensor {
    pub fn cell(&self, row: usize, col: usize) -> Option<&CellTarget> {
        self.cells[row * self.grid_size + col].as_ref()
    }

    pub fn object_count(&self) -> usize {
        self.cells.iter().flatten().count()
    }

    /// One-hot class vector of a cell (all zeros when empty).
    pub fn class_one_hot(&self, row: usize, col: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_classes];
        if let Some(t) = self.cell(row, col) {
            v[t.class_id] = 1.0;
        }
        v
    }

    /// Idealized logits that decode exactly to this target: slot 0 of every
    /// occupied cell carries the box with saturated objectness and class,
    /// every other objectness is saturated off.
    pub fn to_ideal_prediction(&self, cfg: &DetectorConfig) -> PredictionTensor {
        let mut data = vec![0f32; cfg.output_len()];
        let n = cfg.cell_len();
        for (i, cell) in self.cells.iter().enumerate() {
            let base = i * n;
            for k in 0..self.boxes_per_cell {
                data[base + k * 5 + 4] = f32::NEG_INFINITY;
            }
            for c in 0..self.num_classes {
                data[base + self.boxes_per_cell * 5 + c] = f32::NEG_INFINITY;
            }
            if let Some(t) = cell {
                let (tw, th) = match &cfg.anchors {
                    Some(a) => ((t.w / a[0][0]).ln(), (t.h / a[0][1]).ln()),
                    None => (logit(t.w), logit(t.h)),
                };
                data[base] = logit(t.offset_x) as f32;
                data[base + 1] = logit(t.offset_y) as f32;
                data[base + 2] = tw as f32;
                data[base + 3] = th as f32;
                data[base + 4] = f32::INFINITY;
                data[base + self.boxes_per_cell * 5 + t.class_id] = f32::INFINITY;
            }
        }
        PredictionTensor::new(cfg, data).expect("sized from config")
    }
}

/// Assigns each object to the cell containing its center,
/// `(floor(cx·S), floor(cy·S))` clamped to the grid. Later objects landing
/// in an occupied cell are dropped and counted.
pub fn encode_targets(annots: &[Annotation], cfg: &DetectorConfig) -> TargetTensor {
    let s = cfg.grid_size;
    let sf = s as f64;
    let mut cells: Vec<Option<CellTarget>> = vec![None; s * s];
    let mut dropped = 0;
    for a in annots {
        let col = ((a.bbox.cx * sf).floor().max(0.0) as usize).min(s - 1);
        let row = ((a.bbox.cy * sf).floor().max(0.0) as usize).min(s - 1);
        let slot = &mut cells[row * s + col];
        if slot.is_some() {
            dropped += 1;
            log::warn!("object {:?} dropped: grid cell ({row}, {col}) already holds an object", a.bbox);
            continue;
        }
        *slot = Some(CellTarget {
            offset_x: a.bbox.cx * sf - col as f64,
            offset_y: a.bbox.cy * sf - row as f64,
            w: a.bbox.w,
            h: a.bbox.h,
            class_id: a.class_id,
        });
    }
    TargetTensor {
        grid_size: s,
        boxes_per_cell: cfg.boxes_per_cell,
        num_classes: cfg.num_classes,
        cells,
        dropped,
    }
}
