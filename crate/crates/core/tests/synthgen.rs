use std::collections::BTreeMap;
use std::path::Path;

use heliodet::datakit::{parse_label_file, DatasetManifest, Split};
use heliodet::synthgen::{generate_dataset, generate_scene, Background, SynthParams};

#[test]
fn fixed_cell_count_gives_valid_boxes() {
    let p = SynthParams { n_cells: [2, 2], seed: 1, ..SynthParams::default() };
    for i in 0..100 {
        let (_, annots) = generate_scene(&p, i).unwrap();
        assert_eq!(annots.len(), 2, "scene {i}");
        for a in annots {
            a.bbox.validate().unwrap();
            assert_eq!(a.class_id, 0);
        }
    }
}

#[test]
fn boxes_tightly_enclose_rendered_cells() {
    // Plain scenes: one cell, nothing else, no lighting change. Every pixel
    // that differs from the corner background color belongs to the cell.
    let p = SynthParams {
        n_cells: [1, 1],
        n_distractors: [0, 0],
        background: Background::Flat,
        lighting: [1.0, 1.0],
        occlusion_prob: 0.0,
        blur_prob: 0.0,
        shadow_prob: 0.0,
        seed: 3,
        ..SynthParams::default()
    };
    for i in 0..50 {
        let (img, annots) = generate_scene(&p, i).unwrap();
        let n = img.width();
        let bg = img.pixel(0, 0).to_vec();
        let bg = if (0..n).any(|x| img.pixel(x, 0) != bg.as_slice()) { img.pixel(n - 1, n - 1).to_vec() } else { bg };
        let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..n {
            for x in 0..n {
                if img.pixel(x, y) != bg.as_slice() {
                    x1 = x1.min(x);
                    y1 = y1.min(y);
                    x2 = x2.max(x + 1);
                    y2 = y2.max(y + 1);
                }
            }
        }
        let c = annots[0].bbox.to_corners().scale(n as f64, n as f64);
        for (a, b) in [(c.x1, x1), (c.y1, y1), (c.x2, x2), (c.y2, y2)] {
            assert!((a - b as f64).abs() <= 1.0, "scene {i}: box {c:?} vs pixels ({x1},{y1})-({x2},{y2})");
        }
    }
}

#[test]
fn distractor_only_scenes_have_no_labels() {
    let p = SynthParams { n_cells: [0, 0], n_distractors: [2, 2], ..SynthParams::default() };
    for i in 0..10 {
        assert!(generate_scene(&p, i).unwrap().1.is_empty());
    }
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for dir in ["images", "labels"] {
        for e in std::fs::read_dir(root.join(dir)).unwrap() {
            let p = e.unwrap().path();
            out.insert(format!("{dir}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    out.insert("manifest.json".into(), std::fs::read(root.join("manifest.json")).unwrap());
    out
}

#[test]
fn dataset_is_split_and_reproducible() {
    let p = SynthParams { seed: 12, ..SynthParams::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = generate_dataset(&p, 300, a.path(), 0.8, 1).unwrap();
    assert_eq!((m.count(Split::Train), m.count(Split::Test)), (240, 60));
    generate_dataset(&p, 300, b.path(), 0.8, 3).unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));

    let loaded = DatasetManifest::load(a.path()).unwrap();
    assert!(loaded.config.is_some());
    for e in &loaded.entries {
        let text = std::fs::read_to_string(a.path().join(&e.label)).unwrap();
        for ann in parse_label_file(&text).unwrap() {
            ann.bbox.validate().unwrap();
        }
    }
}
