use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LinearModel, Standardizer};
use crate::{Error, Result};

pub const SVM_FORMAT_VERSION: u32 = 1;

/// Standardizer plus one-vs-rest weights; scores raw feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub format_version: u32,
    pub classes: Vec<String>,
    pub c: f64,
    pub class_weighting: bool,
    pub standardizer: Standardizer,
    pub linear: LinearModel,
}

impl SvmModel {
    pub fn new(
        classes: Vec<String>,
        c: f64,
        class_weighting: bool,
        standardizer: Standardizer,
        linear: LinearModel,
    ) -> Self {
        Self {
            format_version: SVM_FORMAT_VERSION,
            classes,
            c,
            class_weighting,
            standardizer,
            linear,
        }
    }

    pub fn decision(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.linear.decision(&self.standardizer.apply(raw)?)
    }

    pub fn predict(&self, raw: &[f64]) -> Result<usize> {
        Ok(super::argmax_lowest(&self.decision(raw)?))
    }

    fn validate(&self) -> Result<()> {
        let corrupt = |tensor: &str, message: String| Error::Corrupt {
            tensor: tensor.to_string(),
            message,
        };
        if self.format_version != SVM_FORMAT_VERSION {
            return Err(corrupt(
                "format_version",
                format!("unsupported version {}", self.format_version),
            ));
        }
        let k = self.classes.len();
        let d = self.standardizer.dim();
        if self.standardizer.scale.len() != d {
            return Err(corrupt(
                "standardizer",
                "mean and scale lengths differ".into(),
            ));
        }
        if self.linear.weights.len() != k || self.linear.biases.len() != k {
            return Err(corrupt("weights", format!("expected {k} class machines")));
        }
        if self.linear.weights.iter().any(|w| w.len() != d) {
            return Err(corrupt(
                "weights",
                format!("every weight vector must have {d} entries"),
            ));
        }
        let finite = self
            .linear
            .weights
            .iter()
            .flatten()
            .chain(&self.linear.biases)
            .chain(&self.standardizer.mean)
            .chain(&self.standardizer.scale)
            .all(|v| v.is_finite());
        if !finite {
            return Err(corrupt("weights", "non-finite value".into()));
        }
        Ok(())
    }
}

pub fn save_svm_model(model: &SvmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(model)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_svm_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: SvmModel = serde_json::from_str(&text)?;
    model.validate()?;
    Ok(model)
}
