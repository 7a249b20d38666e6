use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Square count matrix, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

/// How classes without any true instance enter the UAR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UarMode {
    /// Average only over classes with support.
    #[default]
    Standard,
    /// Count zero-support classes as recall 0.
    Strict,
}

impl std::str::FromStr for UarMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(UarMode::Standard),
            "strict" => Ok(UarMode::Strict),
            other => Err(Error::config(format!(
                "unknown UAR mode `{other}` (standard|strict)"
            ))),
        }
    }
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Builds the matrix from narrative-level predictions. The two id sets
    /// must match exactly.
    pub fn from_predictions(
        predictions: &BTreeMap<String, usize>,
        truths: &BTreeMap<String, usize>,
        k: usize,
    ) -> Result<Self> {
        let unmatched: Vec<&str> = predictions
            .keys()
            .filter(|id| !truths.contains_key(*id))
            .chain(truths.keys().filter(|id| !predictions.contains_key(*id)))
            .map(String::as_str)
            .collect();
        if !unmatched.is_empty() {
            return Err(Error::data(format!(
                "prediction and truth ids differ: {}",
                unmatched.join(", ")
            )));
        }
        let mut cm = Self::zeros(k);
        for (id, &p) in predictions {
            let t = truths[id];
            if t >= k || p >= k {
                return Err(Error::data(format!("class index out of range for `{id}`")));
            }
            cm.add(t, p);
        }
        Ok(cm)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>, k: usize) -> Self {
        let mut cm = Self::zeros(k);
        for (t, p) in pairs {
            cm.add(t, p);
        }
        cm
    }
}

pub fn uar(cm: &ConfusionMatrix) -> Result<f64> {
    uar_with(cm, UarMode::Standard)
}

/// Mean per-class recall.
pub fn uar_with(cm: &ConfusionMatrix, mode: UarMode) -> Result<f64> {
    let mut recalls = Vec::new();
    for (c, row) in cm.counts.iter().enumerate() {
        let support: u64 = row.iter().sum();
        if support > 0 {
            recalls.push(row[c] as f64 / support as f64);
        } else if mode == UarMode::Strict {
            recalls.push(0.0);
        }
    }
    if cm.total() == 0 {
        return Err(Error::data("UAR of an empty confusion matrix"));
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}
