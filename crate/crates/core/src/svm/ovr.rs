use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{train_binary_weighted, SvmConfig};
use crate::{Error, Level, Result};

/// One weight vector and bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// Index of the largest score; ties go to the lower index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl LinearModel {
    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::contract(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_lowest(&self.decision(x)?))
    }
}

fn class_name(c: usize, k: usize) -> String {
    match Level::from_index(c) {
        Some(level) if k == 3 => level.as_str().to_string(),
        _ => format!("class {c}"),
    }
}

/// Balanced weights `n / (k * n_c)`.
pub fn class_weights(y: &[usize], num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; num_classes];
    for &c in y {
        counts[c] += 1;
    }
    counts
        .iter()
        .map(|&nc| {
            if nc == 0 {
                0.0
            } else {
                y.len() as f64 / (num_classes * nc) as f64
            }
        })
        .collect()
}

/// One-vs-rest training over classes `0..num_classes`, all of which must
/// occur in `y`.
pub fn train_ovr(
    x: &[Vec<f64>],
    y: &[usize],
    num_classes: usize,
    cfg: &SvmConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    if num_classes < 2 {
        return Err(Error::config("one-vs-rest needs at least 2 classes"));
    }
    if x.len() != y.len() {
        return Err(Error::contract(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= num_classes) {
        return Err(Error::data(format!("label {bad} outside 0..{num_classes}")));
    }
    for c in 0..num_classes {
        if !y.contains(&c) {
            return Err(Error::data(format!(
                "class `{}` is absent from the training data",
                class_name(c, num_classes)
            )));
        }
    }
    let weights = class_weights(y, num_classes);
    let bounds: Vec<f64> = y
        .iter()
        .map(|&c| {
            if cfg.class_weighting {
                cfg.c * weights[c]
            } else {
                cfg.c
            }
        })
        .collect();

    let machines = (0..num_classes)
        .into_par_iter()
        .map(|c| {
            let targets: Vec<f64> = y
                .iter()
                .map(|&yi| if yi == c { 1.0 } else { -1.0 })
                .collect();
            train_binary_weighted(x, &targets, &bounds, cfg).map_err(|e| {
                Error::data(format!(
                    "binary machine for class `{}`: {e}",
                    class_name(c, num_classes)
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearModel {
        weights: machines.iter().map(|m| m.w.clone()).collect(),
        biases: machines.iter().map(|m| m.b).collect(),
    })
}
