//! Narrative-level scoring and experiment orchestration.

mod config;
mod experiment;
mod metrics;
mod vote;

pub use config::{parse_key_values, Branch, ExperimentConfig, CONFIG_KEYS};
pub use experiment::{
    predictions_csv, run_experiment, split_units, Counts, ExperimentOutcome, LabelTable, Report,
    REPORT_FORMAT_VERSION,
};
pub use metrics::{uar, uar_with, ConfusionMatrix, UarMode};
pub use vote::{majority_vote, vote_narratives, PredictionRecord};
