use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_ovr, Standardizer, SvmConfig, SvmModel};
use crate::eval::{uar_with, vote_narratives, ConfusionMatrix, PredictionRecord, UarMode};
use crate::{Error, Result};

pub const DEFAULT_C_LIST: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// A labeled chunk or sentence feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub narrative_id: String,
    pub unit_index: usize,
    pub label: usize,
    pub features: Vec<f64>,
}

/// Which dev UAR picks the best C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    PostVote,
    PreVote,
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post_vote" => Ok(Selection::PostVote),
            "pre_vote" => Ok(Selection::PreVote),
            other => Err(Error::config(format!(
                "unknown selection `{other}` (post_vote|pre_vote)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub c_list: Vec<f64>,
    /// Solver settings; `c` is replaced by each entry of `c_list`.
    pub svm: SvmConfig,
    pub classes: Vec<String>,
    pub uar_mode: UarMode,
    pub selection: Selection,
}

impl SweepOptions {
    pub fn new(classes: Vec<String>) -> Self {
        Self {
            c_list: DEFAULT_C_LIST.to_vec(),
            svm: SvmConfig::default(),
            classes,
            uar_mode: UarMode::Standard,
            selection: Selection::PostVote,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    /// Narrative-level UAR after majority voting.
    pub uar_dev: f64,
    /// Unit-level UAR before voting.
    pub uar_dev_prevote: f64,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub best: usize,
    pub best_model: SvmModel,
    pub best_records: Vec<PredictionRecord>,
    pub best_confusion: ConfusionMatrix,
}

fn narrative_truths(units: &[Unit], what: &str) -> Result<BTreeMap<String, usize>> {
    let mut truths = BTreeMap::new();
    for u in units {
        if let Some(&prev) = truths.get(&u.narrative_id) {
            if prev != u.label {
                return Err(Error::data(format!(
                    "{what} narrative `{}` has conflicting unit labels",
                    u.narrative_id
                )));
            }
        }
        truths.insert(u.narrative_id.clone(), u.label);
    }
    Ok(truths)
}

/// Trains one model per C on `train`, scores `dev` after majority voting
/// and picks the best C (first one on ties).
pub fn sweep_c(train: &[Unit], dev: &[Unit], opts: &SweepOptions) -> Result<Sweep> {
    if opts.c_list.is_empty() {
        return Err(Error::config("empty C list"));
    }
    for &c in &opts.c_list {
        opts.svm.with_c(c).validate()?;
    }
    if train.is_empty() || dev.is_empty() {
        return Err(Error::data("sweep needs non-empty train and dev sets"));
    }
    let train_ids: BTreeSet<&str> = train.iter().map(|u| u.narrative_id.as_str()).collect();
    let overlap: Vec<&str> = dev
        .iter()
        .map(|u| u.narrative_id.as_str())
        .filter(|id| train_ids.contains(id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !overlap.is_empty() {
        return Err(Error::data(format!(
            "narratives present in both train and dev: {}",
            overlap.join(", ")
        )));
    }
    let k = opts.classes.len();
    narrative_truths(train, "train")?;
    let truths = narrative_truths(dev, "dev")?;

    let x: Vec<Vec<f64>> = train.iter().map(|u| u.features.clone()).collect();
    let y: Vec<usize> = train.iter().map(|u| u.label).collect();
    let standardizer = Standardizer::fit(&x)?;
    let z = standardizer.apply_rows(&x)?;
    let dev_z = dev
        .iter()
        .map(|u| standardizer.apply(&u.features))
        .collect::<Result<Vec<_>>>()?;

    let fits = opts
        .c_list
        .par_iter()
        .map(|&c| -> Result<_> {
            let cfg = opts.svm.with_c(c);
            let linear = train_ovr(&z, &y, k, &cfg)?;
            let records = dev
                .iter()
                .zip(&dev_z)
                .map(|(u, xz)| {
                    let scores = linear.decision(xz)?;
                    Ok(PredictionRecord {
                        narrative_id: u.narrative_id.clone(),
                        unit_index: u.unit_index,
                        predicted: super::argmax_lowest(&scores),
                        scores,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let voted = vote_narratives(&records)?;
            let cm = ConfusionMatrix::from_predictions(&voted, &truths, k)?;
            let unit_cm = ConfusionMatrix::from_pairs(
                dev.iter()
                    .zip(&records)
                    .map(|(u, r)| (u.label, r.predicted)),
                k,
            );
            let row = SweepRow {
                c,
                uar_dev: uar_with(&cm, opts.uar_mode)?,
                uar_dev_prevote: uar_with(&unit_cm, opts.uar_mode)?,
            };
            Ok((row, linear, records, cm))
        })
        .collect::<Result<Vec<_>>>()?;

    let key = |r: &SweepRow| match opts.selection {
        Selection::PostVote => r.uar_dev,
        Selection::PreVote => r.uar_dev_prevote,
    };
    let mut best = 0;
    for (i, (row, ..)) in fits.iter().enumerate() {
        if key(row) > key(&fits[best].0) {
            best = i;
        }
    }
    let rows = fits.iter().map(|f| f.0.clone()).collect();
    let (row, linear, records, cm) = fits.into_iter().nth(best).expect("best index in range");
    Ok(Sweep {
        rows,
        best,
        best_model: SvmModel::new(
            opts.classes.clone(),
            row.c,
            opts.svm.class_weighting,
            standardizer,
            linear,
        ),
        best_records: records,
        best_confusion: cm,
    })
}
