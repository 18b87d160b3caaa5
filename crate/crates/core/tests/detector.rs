use heliodet::datakit::{Annotation, Sample};
use heliodet::detector::{
    build_network, decode, detect, encode_targets, loss_suite, train, yolo_loss, yolo_loss_with_grad,
    DetectorConfig, LossWeights, PredictionTensor, TrainConfig,
};
use heliodet::geometry::BBox;
use heliodet::imagery::Image;
use heliodet::Error;

fn logit(p: f64) -> f32 {
    (p / (1.0 - p)).ln() as f32
}

fn bbox(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
    BBox { cx, cy, w, h }
}

#[test]
fn output_lengths_follow_the_grid_formula() {
    assert_eq!(build_network(&DetectorConfig::reference(7, 2, 1), 0).unwrap().output_len(), 539);
    assert_eq!(build_network(&DetectorConfig::reference(6, 2, 2), 0).unwrap().output_len(), 432);
}

#[test]
fn mismatched_backbone_names_both_lengths() {
    let mut cfg = DetectorConfig::reference(6, 2, 1);
    cfg.backbone.pop();
    cfg.backbone.push(heliodet::nn::LayerSpec::linear(100));
    match build_network(&cfg, 0) {
        Err(Error::Configuration(m)) => assert!(m.contains("100") && m.contains("396"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn init_is_seeded() {
    let cfg = DetectorConfig::reference(6, 2, 1);
    let a = build_network(&cfg, 3).unwrap().flat_params();
    assert_eq!(a, build_network(&cfg, 3).unwrap().flat_params());
    assert_ne!(a, build_network(&cfg, 4).unwrap().flat_params());
}

#[test]
fn encode_center_cell_and_offsets() {
    let cfg = DetectorConfig::reference(7, 2, 1);
    let t = encode_targets(&[Annotation::new(0, bbox(0.5, 0.5, 0.2, 0.3))], &cfg);
    let c = t.cell(3, 3).expect("cell (3,3) occupied");
    assert!((c.offset_x - 0.5).abs() < 1e-12 && (c.offset_y - 0.5).abs() < 1e-12);
    assert_eq!((c.w, c.h), (0.2, 0.3));
    assert_eq!(t.object_count(), 1);

    let edge = encode_targets(&[Annotation::new(0, bbox(1.0, 0.5, 0.1, 0.1))], &cfg);
    assert!(edge.cell(3, 6).is_some());
    assert_eq!(encode_targets(&[], &cfg).object_count(), 0);
}

#[test]
fn second_object_in_a_cell_is_dropped() {
    let cfg = DetectorConfig::reference(2, 1, 1);
    let t = encode_targets(
        &[Annotation::new(0, bbox(0.1, 0.1, 0.1, 0.1)), Annotation::new(0, bbox(0.2, 0.2, 0.1, 0.1))],
        &cfg,
    );
    assert_eq!((t.object_count(), t.dropped), (1, 1));
    assert!((t.cell(0, 0).unwrap().offset_x - 0.2).abs() < 1e-12);
}

fn single_cell() -> DetectorConfig {
    DetectorConfig::reference(1, 1, 1)
}

#[test]
fn hand_evaluated_loss() {
    let cfg = single_cell();
    let target = encode_targets(&[Annotation::new(0, bbox(0.5, 0.5, 0.25, 0.25))], &cfg);
    let pred = PredictionTensor::new(&cfg, vec![0.0, 0.0, logit(0.16), logit(0.36), logit(0.8), f32::INFINITY]).unwrap();
    let l = yolo_loss(&pred, &target, &cfg, LossWeights::default()).unwrap();
    assert!((l.box_loss - 0.1).abs() < 1e-6, "{l:?}");
    assert!((l.objectness - 0.04).abs() < 1e-6);
    assert_eq!((l.no_objectness, l.class), (0.0, 0.0));
    assert!((l.total - 0.14).abs() < 1e-6);
}

#[test]
fn ideal_prediction_has_zero_loss() {
    let cfg = DetectorConfig::reference(4, 2, 3);
    let annots = [
        Annotation::new(2, bbox(0.1, 0.2, 0.15, 0.3)),
        Annotation::new(0, bbox(0.7, 0.6, 0.5, 0.25)),
    ];
    let target = encode_targets(&annots, &cfg);
    let l = yolo_loss(&target.to_ideal_prediction(&cfg), &target, &cfg, LossWeights::default()).unwrap();
    assert!(l.total < 1e-12, "{l:?}");

    let empty = encode_targets(&[], &cfg);
    let l = yolo_loss(&empty.to_ideal_prediction(&cfg), &empty, &cfg, LossWeights::default()).unwrap();
    assert_eq!(l.total, 0.0);
}

#[test]
fn loss_shape_mismatch_is_an_error() {
    let target = encode_targets(&[], &DetectorConfig::reference(2, 1, 1));
    let cfg = DetectorConfig::reference(3, 1, 1);
    let pred = PredictionTensor::new(&cfg, vec![0.0; cfg.output_len()]).unwrap();
    assert!(yolo_loss(&pred, &target, &cfg, LossWeights::default()).is_err());
}

#[test]
fn decode_inverts_encode_arithmetic() {
    let cfg = DetectorConfig::reference(7, 1, 1);
    let mut data = vec![-30.0f32; cfg.output_len()];
    let base = (3 * 7 + 3) * cfg.cell_len();
    data[base..base + 6].copy_from_slice(&[0.0, 0.0, logit(0.2), logit(0.3), logit(0.9), 30.0]);
    let dets = decode(&PredictionTensor::new(&cfg, data).unwrap(), &cfg);
    assert_eq!(dets.len(), 1);
    let d = dets[0];
    assert!((d.bbox.cx - 0.5).abs() < 1e-6 && (d.bbox.cy - 0.5).abs() < 1e-6);
    assert!((d.bbox.w - 0.2).abs() < 1e-6 && (d.bbox.h - 0.3).abs() < 1e-6);
    assert!((d.score - 0.9).abs() < 1e-6);
}

#[test]
fn ideal_predictions_decode_to_the_annotations() {
    let cfg = DetectorConfig::reference(6, 2, 2);
    let annots = vec![
        Annotation::new(0, bbox(0.05, 0.05, 0.1, 0.1)),
        Annotation::new(1, bbox(0.5, 0.5, 0.3, 0.2)),
        Annotation::new(0, bbox(0.93, 0.41, 0.12, 0.5)),
    ];
    let pred = encode_targets(&annots, &cfg).to_ideal_prediction(&cfg);
    let mut dets = decode(&pred, &cfg);
    assert_eq!(dets.len(), 3);
    dets.sort_by(|a, b| a.bbox.cx.total_cmp(&b.bbox.cx));
    for (d, a) in dets.iter().zip(&annots) {
        assert_eq!(d.class_id, a.class_id);
        for (x, y) in [(d.bbox.cx, a.bbox.cx), (d.bbox.cy, a.bbox.cy), (d.bbox.w, a.bbox.w), (d.bbox.h, a.bbox.h)] {
            assert!((x - y).abs() < 1e-6, "{d:?} vs {a:?}");
        }
    }
}

#[test]
fn anchor_sized_target_is_a_fixed_point() {
    let mut cfg = single_cell();
    cfg.anchors = Some(vec![[0.3, 0.4]]);
    let target = encode_targets(&[Annotation::new(0, bbox(0.5, 0.5, 0.3, 0.4))], &cfg);
    let pred = PredictionTensor::new(&cfg, vec![0.0, 0.0, 0.0, 0.0, 2.0, 1.0]).unwrap();
    let (_, grad) = yolo_loss_with_grad(&pred, &target, &cfg, LossWeights::default()).unwrap();
    assert_eq!((grad[2], grad[3]), (0.0, 0.0));
    assert!(grad[4] < 0.0, "objectness should still be pushed up");
    let slot = pred.decode_slot(0, 0, 0, cfg.anchors.as_deref());
    assert_eq!((slot.bbox.w, slot.bbox.h), (0.3, 0.4));
}

#[test]
fn zero_weight_network_detects_nothing() {
    let cfg = DetectorConfig::reference(6, 2, 1);
    let mut net = build_network(&cfg, 0).unwrap();
    let zeros = vec![0.0; net.param_count()];
    net.set_flat_params(&zeros).unwrap();
    let img = Image::from_rgb_fill(120, 80, [200, 30, 30]).unwrap();
    assert!(detect(&img, &net, &cfg).unwrap().is_empty());
}

#[test]
fn detect_rejects_a_network_of_another_size() {
    let cfg = DetectorConfig::reference(6, 2, 1);
    let mut other = cfg.clone();
    other.input_size = 64;
    let net = build_network(&cfg, 0).unwrap();
    let img = Image::from_rgb_fill(10, 10, [0, 0, 0]).unwrap();
    assert!(matches!(detect(&img, &net, &other), Err(Error::Shape { .. })));
}

#[test]
fn loss_gradients_match_finite_differences() {
    for case in loss_suite(20).unwrap() {
        assert!(case.passed(), "{case:?}");
    }
}

fn tiny_setup() -> (Vec<Sample>, DetectorConfig, TrainConfig) {
    let mut cfg = DetectorConfig::reference(2, 1, 1);
    cfg.input_size = 16;
    cfg.backbone = vec![
        heliodet::nn::LayerSpec::conv(4, 3, 1, 1),
        heliodet::nn::LayerSpec::leaky(0.1),
        heliodet::nn::LayerSpec::pool(4),
        heliodet::nn::LayerSpec::Flatten,
        heliodet::nn::LayerSpec::linear(cfg.output_len()),
    ];
    let samples = (0..6)
        .map(|i| {
            let mut image = Image::from_rgb_fill(16, 16, [20, 20, 20]).unwrap();
            let x0 = 2 + i;
            heliodet::imagery::fill_rect(&mut image, x0, 4, x0 + 6, 10, &[230, 230, 230]);
            let b = bbox((x0 as f64 + 3.0) / 16.0, 7.0 / 16.0, 6.0 / 16.0, 6.0 / 16.0);
            Sample { image, annotations: vec![Annotation::new(0, b)] }
        })
        .collect();
    let tcfg = TrainConfig { batch_size: 4, epochs: 3, lr: 0.01, seed: 5, ..TrainConfig::default() };
    (samples, cfg, tcfg)
}

#[test]
fn zero_learning_rate_keeps_initial_weights() {
    let (samples, cfg, mut tcfg) = tiny_setup();
    tcfg.lr = 0.0;
    let initial = build_network(&cfg, tcfg.seed).unwrap().flat_params();
    let out = train(&samples, None, &cfg, &tcfg).unwrap();
    assert_eq!(out.network.flat_params(), initial);
}

#[test]
fn training_is_bit_deterministic() {
    let (samples, cfg, mut tcfg) = tiny_setup();
    // one plain epoch, then online augmentation
    tcfg.augment = true;
    tcfg.augment_warmup_epochs = 1;
    let a = train(&samples, Some(&samples), &cfg, &tcfg).unwrap();
    let b = train(&samples, Some(&samples), &cfg, &tcfg).unwrap();
    assert_eq!(a.network.flat_params(), b.network.flat_params());
    assert_eq!(a.log.to_tsv(), b.log.to_tsv());
    assert_eq!(a.log.records.len(), 3);
    assert!(a.log.records.iter().all(|r| r.val_map.is_some()));
}

#[test]
fn warmup_covering_every_epoch_equals_plain_training() {
    let (samples, cfg, mut tcfg) = tiny_setup();
    tcfg.augment = false;
    let plain = train(&samples, None, &cfg, &tcfg).unwrap();
    tcfg.augment = true;
    tcfg.augment_warmup_epochs = tcfg.epochs;
    let warm = train(&samples, None, &cfg, &tcfg).unwrap();
    assert_eq!(plain.network.flat_params(), warm.network.flat_params());
    tcfg.augment_warmup_epochs = 0;
    let online = train(&samples, None, &cfg, &tcfg).unwrap();
    assert_ne!(plain.network.flat_params(), online.network.flat_params());
}

#[test]
fn train_log_columns() {
    let (samples, cfg, tcfg) = tiny_setup();
    let log = train(&samples, None, &cfg, &tcfg).unwrap().log;
    let text = log.to_tsv();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "epoch\tbox\tobjectness\tno_objectness\tclass\ttotal\tval_mAP");
    let first: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!((first.len(), first[0], first[6]), (7, "1", "nan"));
}

#[test]
fn empty_training_set_is_an_error() {
    let (_, cfg, tcfg) = tiny_setup();
    assert!(matches!(train(&[], None, &cfg, &tcfg), Err(Error::Dataset(_))));
}

#[test]
fn exploding_loss_aborts_with_diagnostics() {
    let (samples, cfg, mut tcfg) = tiny_setup();
    tcfg.lr = 1e30;
    tcfg.epochs = 20;
    match train(&samples, None, &cfg, &tcfg) {
        Err(Error::NonFinite { epoch, term, .. }) => assert!(epoch >= 1 && !term.is_empty()),
        Ok(_) => panic!("training with lr 1e30 should diverge"),
        Err(e) => panic!("{e}"),
    }
}
