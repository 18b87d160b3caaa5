//! Offline training-set expansion with seeded augmentation stacks.

use super::augment::{augment_stack, random_op_stack};
use super::manifest::{write_sample, DatasetManifest, ManifestEntry, Sample, Split};
use crate::error::Result;
use crate::parallel;
use crate::rng;

/// Augmented copy `copy` of pool item `index`. The op stack is drawn from a
/// stream keyed on `(seed, index, copy)`, so results do not depend on
/// evaluation order.
pub fn augmented_copy(pool: &[Sample], index: usize, copy: usize, seed: u64) -> Result<Sample> {
    let mut r = rng::stream(rng::derive_seed(seed, index as u64), copy as u64);
    let ops = random_op_stack(&mut r, pool, index);
    let s = &pool[index];
    let (image, annotations) = augment_stack(&s.image, &s.annotations, &ops)?;
    Ok(Sample { image, annotations })
}

/// Originals followed by `ops_per_image` augmented copies of each, ordered
/// by (original, copy).
pub fn expand_samples(pool: &[Sample], ops_per_image: usize, seed: u64, threads: usize) -> Result<Vec<Sample>> {
    let copies = parallel::map_indexed(pool.len() * ops_per_image, threads, |k| {
        augmented_copy(pool, k / ops_per_image, k % ops_per_image, seed)
    });
    let mut out = pool.to_vec();
    for c in copies {
        out.push(c?);
    }
    Ok(out)
}

/// Writes `ops_per_image` augmented copies of every training entry next to
/// the originals and returns the enlarged manifest (not yet saved). Test
/// entries and their files are left untouched. Copies are stored upright
/// (`orient` 0).
pub fn expand_training_set(
    manifest: &DatasetManifest,
    ops_per_image: usize,
    seed: u64,
    threads: usize,
) -> Result<DatasetManifest> {
    let mut out = manifest.clone();
    if ops_per_image == 0 {
        return Ok(out);
    }
    let train: Vec<&ManifestEntry> = manifest.entries_in(Split::Train).collect();
    let pool = manifest.load_split(Split::Train)?;
    let written = parallel::map_indexed(train.len() * ops_per_image, threads, |k| {
        let (i, j) = (k / ops_per_image, k % ops_per_image);
        let s = augmented_copy(&pool, i, j, seed)?;
        let stem = std::path::Path::new(&train[i].image)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{i}"));
        let (image, label) = write_sample(&manifest.root, &format!("{stem}_aug{j}"), &s.image, &s.annotations)?;
        Ok::<_, crate::Error>(ManifestEntry { image, label, split: Split::Train, orient: 0 })
    });
    for e in written {
        out.entries.push(e?);
    }
    Ok(out)
}
