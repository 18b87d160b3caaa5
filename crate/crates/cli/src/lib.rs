//! Subcommand implementations behind the `heliodet` binary.

pub mod config;
mod overlay;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use heliodet::datakit::{expand_training_set, split_dataset, DatasetManifest, Split};
use heliodet::detector::{detect, loss_suite, train, DetectorConfig};
use heliodet::evalkit::{bench_latency, evaluate_dataset};
use heliodet::imagery::{read_ppm, write_ppm};
use heliodet::nn::{gradcheck, load_weights, save_weights, Network};
use heliodet::synthgen::generate_dataset;
use heliodet::{parallel, Error};
use serde_json::json;

pub use config::{parse_config, Profile, RunConfig};

/// Exit status for a failed run: 2 for I/O problems, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_io() => 2,
        _ => 1,
    }
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> anyhow::Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config { key: key.into(), message: "required by this command".into() }.into())
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Loads weights and the detector architecture stored next to them; the
/// run configuration supplies the post-processing thresholds.
fn load_detector(cfg: &RunConfig) -> anyhow::Result<(Network, DetectorConfig)> {
    let path = required(&cfg.weights, "weights")?;
    let (net, meta) = load_weights(path)?;
    let mut dcfg: DetectorConfig = serde_json::from_value(meta["detector"].clone())
        .with_context(|| format!("{}: weights carry no detector description", path.display()))?;
    dcfg.score_threshold = cfg.score_threshold;
    dcfg.nms_threshold = cfg.nms_threshold;
    Ok((net, dcfg))
}

pub fn synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let root = required(&cfg.dataset, "dataset")?;
    let mut m = generate_dataset(&cfg.synth_params(), cfg.n_images, root, cfg.train_fraction, parallel::threads_from_env())?;
    m.config = Some(cfg.to_value());
    m.save()?;
    eprintln!(
        "wrote {} images to {} ({} train / {} test)",
        m.entries.len(),
        root.display(),
        m.count(Split::Train),
        m.count(Split::Test)
    );
    Ok(())
}

pub fn split(cfg: &RunConfig) -> anyhow::Result<()> {
    let root = required(&cfg.dataset, "dataset")?;
    let m = DatasetManifest::load(root)?;
    let mut out = split_dataset(m.entries, m.classes, root, cfg.train_fraction, cfg.seed)?;
    out.config = Some(cfg.to_value());
    out.save()?;
    eprintln!("{} train / {} test", out.count(Split::Train), out.count(Split::Test));
    Ok(())
}

pub fn augment(cfg: &RunConfig) -> anyhow::Result<()> {
    let root = required(&cfg.dataset, "dataset")?;
    let m = DatasetManifest::load(root)?;
    let mut out = expand_training_set(&m, cfg.ops_per_image, cfg.seed, parallel::threads_from_env())?;
    out.config = Some(cfg.to_value());
    out.save()?;
    eprintln!("training split: {} → {} images", m.count(Split::Train), out.count(Split::Train));
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig) -> anyhow::Result<()> {
    let root = required(&cfg.dataset, "dataset")?;
    let weights = required(&cfg.weights, "weights")?;
    let m = DatasetManifest::load(root)?;
    let train_set = m.load_split(Split::Train)?;
    let val_set = m.load_split(Split::Test)?;
    let dcfg = cfg.detector_config();
    let out = train(&train_set, (!val_set.is_empty()).then_some(val_set.as_slice()), &dcfg, &cfg.train_config())?;
    let meta = json!({ "config": cfg.to_value(), "detector": dcfg });
    save_weights(weights, &out.network, &meta)?;
    let log_path = cfg.train_log.clone().unwrap_or_else(|| {
        let mut p = weights.as_os_str().to_owned();
        p.push(".log.tsv");
        PathBuf::from(p)
    });
    let mut log = out.log;
    log.config = cfg.to_value();
    std::fs::write(&log_path, log.to_tsv()).map_err(|e| Error::io(&log_path, e))?;
    eprintln!("weights → {}, log → {}", weights.display(), log_path.display());
    Ok(())
}

pub fn detect_cmd(cfg: &RunConfig) -> anyhow::Result<()> {
    let (net, dcfg) = load_detector(cfg)?;
    let image_path = required(&cfg.image, "image")?;
    let img = read_ppm(image_path)?;
    let dets = detect(&img, &net, &dcfg)?;
    if let Some(p) = &cfg.overlay {
        write_ppm(p, &overlay::draw_detections(&img, &dets))?;
    }
    let doc = json!({
        "config": cfg.to_value(),
        "image": image_path,
        "width": img.width(),
        "height": img.height(),
        "detections": dets,
    });
    write_json(cfg.report.as_deref(), &doc)
}

fn split_images(cfg: &RunConfig) -> anyhow::Result<(DatasetManifest, Vec<heliodet::datakit::Sample>)> {
    let root = required(&cfg.dataset, "dataset")?;
    let m = DatasetManifest::load(root)?;
    let samples = m.load_split(cfg.split)?;
    if samples.is_empty() {
        bail!(Error::Dataset(format!("{:?} split of {} is empty", cfg.split, root.display())));
    }
    Ok((m, samples))
}

pub fn eval(cfg: &RunConfig) -> anyhow::Result<()> {
    let (net, dcfg) = load_detector(cfg)?;
    let (m, samples) = split_images(cfg)?;
    let mut report = evaluate_dataset(&m, cfg.split, &net, &dcfg, cfg.iou_threshold, parallel::threads_from_env())?;
    if cfg.measure_latency {
        let images: Vec<_> = samples.into_iter().map(|s| s.image).collect();
        report.latency = Some(bench_latency(&net, &dcfg, &images, cfg.warmup)?);
    }
    report.config = Some(cfg.to_value());
    write_json(cfg.report.as_deref(), &serde_json::to_value(&report)?)
}

pub fn bench(cfg: &RunConfig) -> anyhow::Result<()> {
    let (net, dcfg) = load_detector(cfg)?;
    let (_, samples) = split_images(cfg)?;
    let images: Vec<_> = samples.into_iter().map(|s| s.image).collect();
    let stats = bench_latency(&net, &dcfg, &images, cfg.warmup)?;
    write_json(cfg.report.as_deref(), &json!({ "config": cfg.to_value(), "latency": stats }))
}

/// Runs the finite-difference suite; fails when any case exceeds tolerance.
pub fn gradcheck_cmd(cfg: &RunConfig) -> anyhow::Result<()> {
    const SEEDS: u64 = 20;
    let mut cases = gradcheck::layer_suite(SEEDS)?;
    cases.extend(loss_suite(SEEDS)?);
    for c in &cases {
        eprintln!(
            "{:<20} {} max rel err {:.2e} over {} coordinates",
            c.case,
            if c.passed() { "ok  " } else { "FAIL" },
            c.max_rel_error,
            c.coordinates
        );
    }
    let failed: Vec<&str> = cases.iter().filter(|c| !c.passed()).map(|c| c.case.as_str()).collect();
    write_json(
        cfg.report.as_deref(),
        &json!({ "config": cfg.to_value(), "tolerance": gradcheck::FD_TOLERANCE, "cases": cases }),
    )?;
    if !failed.is_empty() {
        bail!("gradient check failed: {}", failed.join(", "));
    }
    Ok(())
}
