use std::collections::BTreeSet;

use log::info;
use serde::{Deserialize, Serialize};

use super::{SampleCnnModel, TrainConfig};
use crate::audio::{batch_iter, AugmentConfig, DatasetIndex, LabelColumn, LabeledClip};
use crate::{mix_seed, Error, Level, Partition, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub skipped_files: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub epochs: Vec<EpochMetrics>,
}

/// Training and validation clips for a binary pretraining task.
///
/// Class indices follow the level order (low < medium < high) of the
/// labels present in the train partition, which must contain exactly
/// `num_classes` distinct values.
pub fn clips_from_index(
    index: &DatasetIndex,
    column: LabelColumn,
    num_classes: usize,
) -> Result<(Vec<LabeledClip>, Vec<LabeledClip>, Vec<Level>)> {
    let classes: Vec<Level> = index
        .partition(Partition::Train)
        .iter()
        .map(|e| e.label(column))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() != num_classes {
        return Err(Error::data(format!(
            "train partition has {} distinct {} labels, model expects {num_classes}",
            classes.len(),
            column.as_str()
        )));
    }
    let to_clip = |e: &crate::audio::DatasetEntry| -> Result<LabeledClip> {
        let level = e.label(column);
        let label = classes.iter().position(|&c| c == level).ok_or_else(|| {
            Error::data(format!(
                "label `{level}` of {} not seen in training",
                e.path.display()
            ))
        })?;
        Ok(LabeledClip {
            path: e.path.clone(),
            source_id: e.path.display().to_string(),
            label,
        })
    };
    let train = index
        .partition(Partition::Train)
        .into_iter()
        .map(to_clip)
        .collect::<Result<_>>()?;
    let dev = index
        .partition(Partition::Dev)
        .into_iter()
        .map(to_clip)
        .collect::<Result<_>>()?;
    Ok((train, dev, classes))
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Inference-mode accuracy over `clips` (random chunk, no augmentation).
pub fn evaluate_accuracy(
    model: &SampleCnnModel<f32>,
    clips: &[LabeledClip],
    batch_size: usize,
    seed: u64,
) -> Result<f64> {
    let k = model.config.num_classes;
    let mut correct = 0usize;
    let mut total = 0usize;
    for batch in batch_iter(clips, batch_size, model.config.input_len, None, seed, 0)? {
        let probs = model.classify(&batch.input)?;
        for (row, &y) in probs.data().chunks_exact(k).zip(&batch.labels) {
            correct += usize::from(argmax(row) == y);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::data("no readable validation clips"));
    }
    Ok(correct as f64 / total as f64)
}

/// Adam on the cross-entropy of time-averaged class probabilities.
///
/// Each epoch shuffles `train` by `(seed, epoch)`, draws a random chunk per
/// clip, augments and normalizes it. Validation accuracy is measured in
/// inference mode after every epoch when `val` is non-empty.
pub fn pretrain(
    model: &mut SampleCnnModel<f32>,
    train: &[LabeledClip],
    val: &[LabeledClip],
    cfg: &TrainConfig,
) -> Result<MetricsLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::data("pretraining dataset is empty"));
    }
    if let Some(bad) = train
        .iter()
        .chain(val)
        .find(|c| c.label >= model.config.num_classes)
    {
        return Err(Error::data(format!(
            "label {} of {} exceeds model classes",
            bad.label,
            bad.path.display()
        )));
    }
    let k = model.config.num_classes;
    let mut log = MetricsLog::default();
    for epoch in 0..cfg.epochs {
        let augment = AugmentConfig {
            seed: mix_seed(cfg.seed, 0xa0a0),
            ..cfg.augment
        };
        let mut batches = batch_iter(
            train,
            cfg.batch_size,
            model.config.input_len,
            Some(augment),
            cfg.seed,
            epoch as u64,
        )?;
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for (step, batch) in batches.by_ref().enumerate() {
            model.zero_grad();
            let dropout_seed = mix_seed(cfg.seed, ((epoch as u64) << 32) | step as u64);
            let (loss, probs) = model
                .loss_and_backward(&batch.input, &batch.labels, dropout_seed)
                .map_err(|e| match e {
                    Error::NonFinite(m) => {
                        Error::NonFinite(format!("{m} at epoch {epoch}, batch {step}"))
                    }
                    other => other,
                })?;
            model.adam_step(&cfg.adam);
            let n = batch.labels.len();
            loss_sum += f64::from(loss) * n as f64;
            seen += n;
            for (row, &y) in probs.data().chunks_exact(k).zip(&batch.labels) {
                correct += usize::from(argmax(row) == y);
            }
        }
        let skipped = batches.skipped().len();
        if seen == 0 {
            return Err(Error::data("no readable training clips"));
        }
        let val_accuracy = if val.is_empty() {
            None
        } else {
            Some(evaluate_accuracy(model, val, cfg.batch_size, cfg.seed)?)
        };
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_accuracy,
            skipped_files: skipped,
        };
        info!(
            "epoch {}: loss {:.4}, train acc {:.3}, val acc {}",
            m.epoch,
            m.train_loss,
            m.train_accuracy,
            m.val_accuracy
                .map_or("-".to_string(), |a| format!("{a:.3}"))
        );
        log.epochs.push(m);
    }
    // Gradient buffers are scratch and not checkpointed.
    model.zero_grad();
    Ok(log)
}
