use super::{decode_with_threshold, DetectorConfig, PredictionTensor};
use crate::error::{Error, Result};
use crate::geometry::{nms, CornerBox, Detection};
use crate::imagery::{letterbox, Image, LetterboxTransform, DEFAULT_PAD_VALUE};
use crate::nn::{Network, Tensor};

/// Builds the configured layer stack with seeded initialization and checks
/// that it ends in exactly S·S·(B·5+C) values.
pub fn build_network(cfg: &DetectorConfig, seed: u64) -> Result<Network> {
    cfg.validate()?;
    let net = Network::build(&cfg.input_shape(), &cfg.backbone, seed)?;
    if net.output_len() != cfg.output_len() {
        return Err(Error::Configuration(format!(
            "backbone emits {} values, expected S·S·(B·5+C) = {}·{}·({}·5+{}) = {}",
            net.output_len(),
            cfg.grid_size,
            cfg.grid_size,
            cfg.boxes_per_cell,
            cfg.num_classes,
            cfg.output_len()
        )));
    }
    Ok(net)
}

/// Letterboxes to the network input and converts to a planar [0, 1] tensor.
pub fn prepare_input(img: &Image, cfg: &DetectorConfig) -> Result<(Tensor, LetterboxTransform)> {
    let (boxed, t) = letterbox(img, cfg.input_size, cfg.input_size, DEFAULT_PAD_VALUE)?;
    let tensor = Tensor::new(cfg.input_shape().to_vec(), boxed.to_rgb().to_planar_f32())?;
    Ok((tensor, t))
}

fn check_network(net: &Network, cfg: &DetectorConfig) -> Result<()> {
    if net.input_shape() != cfg.input_shape() {
        return Err(Error::shape(
            "detect",
            format!("network expects input {:?}, detector config says {:?}", net.input_shape(), cfg.input_shape()),
        ));
    }
    if net.output_len() != cfg.output_len() {
        return Err(Error::shape(
            "detect",
            format!("network emits {} values, detector config needs {}", net.output_len(), cfg.output_len()),
        ));
    }
    Ok(())
}

/// [`detect`] with an explicit score threshold.
pub fn detect_with_threshold(
    img: &Image,
    net: &Network,
    cfg: &DetectorConfig,
    score_threshold: f64,
) -> Result<Vec<Detection>> {
    check_network(net, cfg)?;
    let (input, t) = prepare_input(img, cfg)?;
    let out = net.predict(input)?;
    let pred = PredictionTensor::new(cfg, out.into_data())?;
    let kept = nms(&decode_with_threshold(&pred, cfg, score_threshold), cfg.nms_threshold);
    let (iw, ih) = (cfg.input_size as f64, cfg.input_size as f64);
    let (sw, sh) = (img.width() as f64, img.height() as f64);
    Ok(kept
        .into_iter()
        .filter_map(|d| {
            let c = d.bbox.to_corners();
            let [x1, y1, x2, y2] = t.inverse_box([c.x1 * iw, c.y1 * ih, c.x2 * iw, c.y2 * ih]);
            let src = CornerBox::new(x1 / sw, y1 / sh, x2 / sw, y2 / sh);
            let bbox = crate::geometry::BBox::from_corners(&src).clamp_unit()?;
            Some(Detection { bbox, ..d })
        })
        .collect())
}

/// Letterbox, forward pass, decode, class-aware NMS, and mapping back to
/// normalized source-image coordinates. Results are sorted by score.
pub fn detect(img: &Image, net: &Network, cfg: &DetectorConfig) -> Result<Vec<Detection>> {
    detect_with_threshold(img, net, cfg, cfg.score_threshold)
}
