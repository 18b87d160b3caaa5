use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    build_network, encode_targets, prepare_input, yolo_loss_with_grad, DetectorConfig, LossBreakdown,
    LossWeights, PredictionTensor, TargetTensor, TrainConfig,
};
use crate::datakit::{augment_stack, letterbox_boxes, training_op_stack, Sample};
use crate::error::{Error, Result};
use crate::evalkit;
use crate::nn::{Network, Sgd, Tensor};
use crate::rng;

const SHUFFLE_STREAM: u64 = 1;
const AUGMENT_STREAM: u64 = 2;

/// Mean losses of one epoch and the validation mAP after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Effective detector and training configuration.
    pub config: serde_json::Value,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub const COLUMNS: [&'static str; 7] = ["epoch", "box", "objectness", "no_objectness", "class", "total", "val_mAP"];

    /// Tab-separated text: a `# config: {json}` comment, a column header, then
    /// one line per epoch. A missing validation mAP is written as `nan`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# config: {}\n{}\n", self.config, Self::COLUMNS.join("\t"));
        for r in &self.records {
            let l = &r.loss;
            let map = r.val_map.map_or_else(|| "nan".to_string(), |m| format!("{m:.6}"));
            writeln!(
                out,
                "{}\t{:.8}\t{:.8}\t{:.8}\t{:.8}\t{:.8}\t{map}",
                r.epoch, l.box_loss, l.objectness, l.no_objectness, l.class, l.total
            )
            .expect("writing to a String");
        }
        out
    }

    /// Trailing mean of the objectness term over `window` epochs, one value
    /// per epoch (shorter windows at the start).
    pub fn smoothed_objectness(&self, window: usize) -> Vec<f64> {
        let v: Vec<f64> = self.records.iter().map(|r| r.loss.objectness).collect();
        (0..v.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(window.max(1));
                v[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }
}

pub struct TrainOutcome {
    pub network: Network,
    pub log: TrainLog,
}

struct Prepared {
    input: Vec<f32>,
    target: TargetTensor,
}

fn prepare(s: &Sample, cfg: &DetectorConfig) -> Result<Prepared> {
    let (input, t) = prepare_input(&s.image, cfg)?;
    let boxes = letterbox_boxes(&s.annotations, &t);
    Ok(Prepared {
        input: input.into_data(),
        target: encode_targets(&boxes, cfg),
    })
}

/// Sample `index` as seen in `epoch` under online augmentation.
fn augmented(s: &Sample, cfg: &DetectorConfig, seed: u64, epoch: usize, index: usize) -> Result<Prepared> {
    let mut r = rng::stream(rng::derive_seed(rng::derive_seed(seed, AUGMENT_STREAM), epoch as u64), index as u64);
    let (image, annotations) = augment_stack(&s.image, &s.annotations, &training_op_stack(&mut r))?;
    prepare(&Sample { image, annotations }, cfg)
}

/// Mini-batch SGD over `train_set`. Each epoch visits the samples in a
/// seeded shuffle; gradients are averaged over the batch. When `val_set` is
/// given, its mAP@0.5 is recorded after every epoch.
pub fn train(
    train_set: &[Sample],
    val_set: Option<&[Sample]>,
    dcfg: &DetectorConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    dcfg.validate()?;
    tcfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let mut net = build_network(dcfg, tcfg.seed)?;
    // plain epochs reuse the same tensors
    let fixed: Vec<Prepared> = if tcfg.augment && tcfg.augment_warmup_epochs == 0 {
        Vec::new()
    } else {
        train_set.iter().map(|s| prepare(s, dcfg)).collect::<Result<_>>()?
    };
    let weights = LossWeights {
        coord: tcfg.lambda_coord,
        noobj: tcfg.lambda_noobj,
    };
    let mut sgd = Sgd {
        lr: tcfg.lr as f32,
        momentum: tcfg.momentum as f32,
        weight_decay: tcfg.weight_decay as f32,
    };
    let input_shape = dcfg.input_shape().to_vec();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(tcfg.epochs);

    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng::stream(rng::derive_seed(tcfg.seed, SHUFFLE_STREAM), epoch as u64));
        let mut sum = LossBreakdown::default();
        sgd.lr = tcfg.lr_schedule.lr_at(tcfg.lr, epoch, tcfg.epochs) as f32;
        let online_epoch = tcfg.augment && epoch > tcfg.augment_warmup_epochs;
        for (batch_index, batch) in order.chunks(tcfg.batch_size).enumerate() {
            net.zero_grad();
            for &i in batch {
                let online;
                let p = if online_epoch {
                    online = augmented(&train_set[i], dcfg, tcfg.seed, epoch, i)?;
                    &online
                } else {
                    &fixed[i]
                };
                let out = net.forward(Tensor::new(input_shape.clone(), p.input.clone())?)?;
                let pred = PredictionTensor::new(dcfg, out.into_data())?;
                let (loss, grad) = yolo_loss_with_grad(&pred, &p.target, dcfg, weights)?;
                if let Some(term) = loss.non_finite_term() {
                    return Err(Error::NonFinite {
                        epoch,
                        batch: batch_index,
                        term,
                        total: loss.total,
                    });
                }
                sum.add(&loss);
                net.backward_params(Tensor::from_vec(grad))?;
            }
            sgd.step(&mut net, 1.0 / batch.len() as f32)?;
        }
        let mean = sum.scaled(1.0 / train_set.len() as f64);
        let val_map = match val_set {
            Some(v) if !v.is_empty() => evalkit::evaluate_samples(&net, dcfg, v, evalkit::DEFAULT_IOU_THRESHOLD, 1)
                .ok()
                .map(|r| r.map),
            _ => None,
        };
        log::info!(
            "epoch {epoch}: total {:.5} box {:.5} obj {:.5} noobj {:.5} class {:.5} val mAP {}",
            mean.total,
            mean.box_loss,
            mean.objectness,
            mean.no_objectness,
            mean.class,
            val_map.map_or_else(|| "-".into(), |m| format!("{m:.4}"))
        );
        records.push(EpochRecord { epoch, loss: mean, val_map });
    }

    let config = serde_json::json!({ "detector": dcfg, "train": tcfg });
    Ok(TrainOutcome {
        network: net,
        log: TrainLog { config, records },
    })
}
