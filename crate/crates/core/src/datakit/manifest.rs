//! On-disk dataset layout:
//!
//! ```text
//! root/images/<stem>.ppm
//! root/labels/<stem>.txt
//! root/manifest.json   {classes, entries: [{image, label, split, orient}]}
//! ```

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::labels::{parse_label_file, write_label_file, Annotation};
use super::preprocess::orient_sample;
use crate::error::{Error, Result};
use crate::imagery::{read_ppm, write_ppm, Image};
use crate::rng;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One image/label pair. Paths are relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image: String,
    pub label: String,
    pub split: Split,
    /// Clockwise rotation in degrees (0, 90, 180, 270) that makes the stored
    /// image upright.
    #[serde(default)]
    pub orient: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(skip)]
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    /// Effective configuration that produced the dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// An upright image with its objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub annotations: Vec<Annotation>,
}

impl DatasetManifest {
    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries_in(split).count()
    }

    /// Reads `root/manifest.json` and checks that every referenced file exists.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        m.root = root.to_path_buf();
        for e in &m.entries {
            if !matches!(e.orient, 0 | 90 | 180 | 270) {
                return Err(Error::Dataset(format!("{}: orient {} not a multiple of 90", e.image, e.orient)));
            }
        }
        let missing: Vec<PathBuf> = m
            .entries
            .iter()
            .flat_map(|e| [root.join(&e.image), root.join(&e.label)])
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        Ok(m)
    }

    /// Writes `root/manifest.json` (pretty-printed, trailing newline).
    pub fn save(&self) -> Result<()> {
        let path = self.root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<Sample> {
        let image = read_ppm(self.root.join(&entry.image))?;
        let label_path = self.root.join(&entry.label);
        let text = std::fs::read_to_string(&label_path).map_err(|e| Error::io(&label_path, e))?;
        let annotations = parse_label_file(&text).map_err(|e| match e {
            Error::Label { line, message } => Error::Label {
                line,
                message: format!("{}: {message}", label_path.display()),
            },
            other => other,
        })?;
        if let Some(a) = annotations.iter().find(|a| a.class_id >= self.classes.len()) {
            return Err(Error::Dataset(format!(
                "{}: class {} but only {} classes declared",
                label_path.display(),
                a.class_id,
                self.classes.len()
            )));
        }
        Ok(orient_sample(&image, &annotations, entry.orient))
    }

    /// Loads every sample of a split, upright, in manifest order.
    pub fn load_split(&self, split: Split) -> Result<Vec<Sample>> {
        let entries: Vec<&ManifestEntry> = self.entries_in(split).collect();
        let missing: Vec<PathBuf> = entries
            .iter()
            .flat_map(|e| [self.root.join(&e.image), self.root.join(&e.label)])
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        entries.into_iter().map(|e| self.load_entry(e)).collect()
    }
}

/// Writes an image/label pair under `root` with the given stem and returns
/// its relative paths.
pub fn write_sample(root: &Path, stem: &str, image: &Image, annots: &[Annotation]) -> Result<(String, String)> {
    for dir in ["images", "labels"] {
        let d = root.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let image_rel = format!("images/{stem}.ppm");
    let label_rel = format!("labels/{stem}.txt");
    write_ppm(root.join(&image_rel), image)?;
    let lp = root.join(&label_rel);
    std::fs::write(&lp, write_label_file(annots)).map_err(|e| Error::io(&lp, e))?;
    Ok((image_rel, label_rel))
}

/// Number of training entries for `n` items: `floor(train_fraction · n)`.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    // tolerance absorbs representation error such as 0.29 · 100 = 28.999…
    ((train_fraction * n as f64) + 1e-9).floor() as usize
}

/// Seeded uniform shuffle; the first `floor(train_fraction · N)` shuffled
/// entries become training entries, the rest test. Entries keep their
/// original order in the manifest.
pub fn split_dataset(
    mut entries: Vec<ManifestEntry>,
    classes: Vec<String>,
    root: impl Into<PathBuf>,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetManifest> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Argument(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    if entries.len() < 2 {
        return Err(Error::Argument(format!("need at least 2 entries to split, got {}", entries.len())));
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.shuffle(&mut rng::rng(seed));
    let n_train = train_count(entries.len(), train_fraction);
    for (rank, &i) in order.iter().enumerate() {
        entries[i].split = if rank < n_train { Split::Train } else { Split::Test };
    }
    Ok(DatasetManifest {
        root: root.into(),
        classes,
        entries,
        config: None,
    })
}
