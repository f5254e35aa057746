//! Mini-batch training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax_labels, images_to_batch, Network};
use crate::dataset::{Image, LabelMap};
use crate::error::{Error, Result};
use crate::metrics::ConfusionCounts;
use crate::optim::{Optimizer, OptimizerConfig};
use crate::rng;

/// An image with its ground-truth label map.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub labels: LabelMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 2,
            optimizer: OptimizerConfig::default(),
            seed: rng::DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Per-pixel mean cross-entropy over the epoch's batches.
    pub mean_loss: f64,
    /// Mean IOU on the validation set, when one is given.
    pub val_miou: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

fn check_samples(samples: &[Sample], num_classes: usize, what: &str) -> Result<(usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Data(format!("{what} set is empty")))?;
    let dims = (first.image.width(), first.image.height());
    for (i, s) in samples.iter().enumerate() {
        if (s.image.width(), s.image.height()) != dims
            || (s.labels.width(), s.labels.height()) != dims
        {
            return Err(Error::Data(format!(
                "{what} sample {i}: expected {}x{} image and labels",
                dims.0, dims.1
            )));
        }
        s.labels.check_classes(num_classes)?;
    }
    Ok(dims)
}

/// Confusion counts of the network's predictions over `samples`.
pub(crate) fn evaluate(net: &Network, samples: &[Sample]) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::new(net.num_classes());
    for s in samples {
        let pred = net.predict(&s.image)?;
        counts.accumulate(&pred, &s.labels)?;
    }
    Ok(counts)
}

/// Fraction of pixels whose predicted class matches the label map.
pub fn pixel_accuracy(net: &Network, samples: &[Sample]) -> Result<f64> {
    let counts = evaluate(net, samples)?;
    let total: u64 = counts.ground_truth_totals().iter().sum();
    let correct: u64 = counts.tp().iter().sum();
    Ok(correct as f64 / total.max(1) as f64)
}

/// [`train_with`] without a progress callback.
pub fn train(
    net: &mut Network,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<TrainReport> {
    train_with(net, train_set, val_set, config, |_| {})
}

/// Runs `config.epochs` passes of shuffled mini-batch training.
///
/// Each batch does forward, softmax cross-entropy, backward and one
/// optimizer step. The last batch of an epoch may be smaller than
/// `batch_size`. The shuffle order comes from `config.seed`, so identical
/// inputs give identical parameters and losses. `on_epoch` sees each epoch's
/// statistics as they are produced.
pub fn train_with(
    net: &mut Network,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    let classes = net.num_classes();
    check_samples(train_set, classes, "training")?;
    if !val_set.is_empty() {
        check_samples(val_set, classes, "validation")?;
    }
    if config.batch_size == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    let shapes: Vec<Vec<usize>> = net.parameters().iter().map(|p| p.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let mut optimizer = Optimizer::new(config.optimizer, &shape_refs)?;
    let norm = net.config().normalization;
    let mut rng = rng::seeded(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut pixels = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let images: Vec<&Image> = chunk.iter().map(|&i| &train_set[i].image).collect();
            let targets: Vec<u8> = chunk
                .iter()
                .flat_map(|&i| train_set[i].labels.labels().iter().copied())
                .collect();
            let batch = images_to_batch(&images, norm)?;
            let diverged = |loss| Error::Diverged {
                epoch,
                batch: b + 1,
                loss,
            };
            let (loss, mut grads) = match net.loss_and_grads(&batch, &targets) {
                Err(Error::Numeric(_)) => return Err(diverged(f64::NAN)),
                other => other?,
            };
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(diverged(loss));
            }
            optimizer.step(&mut net.parameters_mut(), &mut grads)?;
            loss_sum += loss * targets.len() as f64;
            pixels += targets.len();
        }
        let val_miou = if val_set.is_empty() {
            None
        } else {
            evaluate(net, val_set)?.iou_report().ok().map(|r| r.mean_iou)
        };
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / pixels as f64,
            val_miou,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        report.epochs.push(stats);
    }
    Ok(report)
}

/// Predictions for a batch of samples, in order.
pub fn predict_batch(net: &Network, images: &[&Image]) -> Result<Vec<LabelMap>> {
    let batch = images_to_batch(images, net.config().normalization)?;
    argmax_labels(&net.forward(&batch)?)
}
