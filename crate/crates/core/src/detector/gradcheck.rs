//! Finite-difference check of the detection loss through a small network.

use rand::Rng as _;

use super::{build_network, encode_targets, yolo_loss, yolo_loss_with_grad, DetectorConfig, LossWeights, PredictionTensor};
use crate::datakit::Annotation;
use crate::error::Result;
use crate::geometry::BBox;
use crate::nn::gradcheck::{max_fd_error, GradCheck};
use crate::nn::{LayerSpec, Tensor};
use crate::rng;

/// Toy detector: 2×2 grid, two slots, two classes, 8×8 input.
///
/// The backbone is smooth on purpose. Leaky and max-pool kinks make central
/// differences through a whole network unreliable (a ±ε nudge of one weight
/// moves hundreds of activations, and any of them may cross a kink); those
/// layers are checked individually by the layer suite with inputs kept away
/// from their kinks.
pub fn toy_config(anchors: bool) -> DetectorConfig {
    let mut cfg = DetectorConfig::reference(2, 2, 2);
    cfg.input_size = 8;
    cfg.backbone = vec![
        LayerSpec::conv(4, 2, 2, 0),
        LayerSpec::Sigmoid,
        LayerSpec::Flatten,
        LayerSpec::linear(cfg.output_len()),
    ];
    if anchors {
        cfg.anchors = Some(vec![[0.3, 0.4], [0.6, 0.2]]);
    }
    cfg
}

/// Max relative error over every parameter and every raw prediction for
/// one seeded network, input, and target set.
pub fn check_loss_once(cfg: &DetectorConfig, seed: u64) -> Result<(usize, f64)> {
    let mut r = rng::stream(seed, 0);
    let mut net = build_network(cfg, seed)?;
    let shape = cfg.input_shape().to_vec();
    let input: Vec<f32> = (0..shape.iter().product::<usize>()).map(|_| r.random_range(0.0..1.0)).collect();
    // one object per occupied cell, each cell occupied with probability 1/2
    let s = cfg.grid_size;
    let mut annots = Vec::new();
    for row in 0..s {
        for col in 0..s {
            if r.random_bool(0.5) {
                let cx = (col as f64 + r.random_range(0.05..0.95)) / s as f64;
                let cy = (row as f64 + r.random_range(0.05..0.95)) / s as f64;
                let bbox = BBox { cx, cy, w: r.random_range(0.1..0.6), h: r.random_range(0.1..0.6) };
                annots.push(Annotation::new(r.random_range(0..cfg.num_classes), bbox));
            }
        }
    }
    let target = encode_targets(&annots, cfg);
    let weights = LossWeights::default();

    net.zero_grad();
    let out = net.forward(Tensor::new(shape.clone(), input.clone())?)?;
    let raw = out.into_data();
    let (_, grad_raw) = yolo_loss_with_grad(&PredictionTensor::new(cfg, raw.clone())?, &target, cfg, weights)?;
    net.backward_params(Tensor::from_vec(grad_raw.clone()))?;

    let loss_of_raw = |p: &[f32]| {
        let pred = PredictionTensor::new(cfg, p.to_vec()).expect("sized");
        yolo_loss(&pred, &target, cfg, weights).expect("shapes agree").total
    };
    let e_raw = max_fd_error(loss_of_raw, &raw, &grad_raw);

    let params = net.flat_params();
    let grads = net.flat_grads();
    let mut probe = net.clone();
    let e_params = max_fd_error(
        |p| {
            probe.set_flat_params(p).expect("same length");
            let out = probe.predict(Tensor::new(shape.clone(), input.clone()).expect("sized")).expect("fixed shape");
            loss_of_raw(out.data())
        },
        &params,
        &grads,
    );
    Ok((params.len() + raw.len(), e_raw.max(e_params)))
}

/// The loss check over `seeds` seeds, in direct and anchor size modes.
pub fn loss_suite(seeds: u64) -> Result<Vec<GradCheck>> {
    let mut out = Vec::new();
    for (case, anchors) in [("yolo_loss", false), ("yolo_loss_anchors", true)] {
        let cfg = toy_config(anchors);
        let errs = (0..seeds).map(|s| check_loss_once(&cfg, s)).collect::<Result<Vec<_>>>()?;
        out.push(GradCheck::merge(case, errs));
    }
    Ok(out)
}
