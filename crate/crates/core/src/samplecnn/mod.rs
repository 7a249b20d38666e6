//! The raw-waveform residual CNN: architecture, pretraining, checkpoints
//! and pooled feature extraction.

mod checkpoint;
mod config;
mod extract;
mod head;
mod layers;
mod model;
mod pool;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, TrainingRecord, CHECKPOINT_MAGIC,
};
pub use config::{SampleCnnConfig, TrainConfig, FINAL_FILTERS};
pub use extract::{extract_features, ExtractionReport, NarrativeFile};
pub use head::averaged_softmax_xent;
pub use layers::{BnLayer, ConvLayer, DenseLayer};
pub use model::{build_model, FeatureCtx, ResBlock, SampleCnnModel, Stage};
pub use pool::pool_features;
pub(crate) use pool::sorted_mean_max;
pub use train::{clips_from_index, evaluate_accuracy, pretrain, EpochMetrics, MetricsLog};
