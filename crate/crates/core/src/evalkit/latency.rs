use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detector::{detect, DetectorConfig};
use crate::error::{Error, Result};
use crate::imagery::Image;
use crate::nn::Network;

/// Per-image wall-clock statistics in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Nearest-rank 95th percentile.
    pub p95_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples_ms: &[f64]) -> Result<Self> {
        if samples_ms.is_empty() {
            return Err(Error::Argument("no timing samples".into()));
        }
        let mut v = samples_ms.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Ok(Self {
            count: n,
            mean_ms: v.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p95_ms: v[rank - 1],
            min_ms: v[0],
            max_ms: v[n - 1],
        })
    }
}

/// Times the full detect path (letterbox, forward, decode, NMS) once per
/// image on the calling thread, after `warmup` untimed runs on the first
/// image.
pub fn bench_latency(net: &Network, cfg: &DetectorConfig, images: &[Image], warmup: usize) -> Result<LatencyStats> {
    let first = images
        .first()
        .ok_or_else(|| Error::Argument("bench needs at least one image".into()))?;
    for _ in 0..warmup {
        detect(first, net, cfg)?;
    }
    let mut times = Vec::with_capacity(images.len());
    for img in images {
        let start = Instant::now();
        let dets = detect(img, net, cfg)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(dets);
    }
    LatencyStats::from_samples(&times)
}
