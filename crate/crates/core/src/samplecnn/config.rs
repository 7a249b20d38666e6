use serde::{Deserialize, Serialize};

use crate::audio::{AugmentConfig, CHUNK_LEN};
use crate::nn::{conv_out_len, AdamConfig};
use crate::{Error, Result};

pub const FINAL_FILTERS: usize = 768;
const BLOCK_COUNT: usize = 7;
const BLOCK_STRIDE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCnnConfig {
    pub initial_filters: usize,
    pub block_filters: Vec<usize>,
    pub kernel_size: usize,
    pub block_stride: usize,
    pub final_filters: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub input_len: usize,
    /// Permits fewer than seven residual blocks (and other dropout rates)
    /// for reduced experiments and gradient checks.
    #[serde(default)]
    pub reduced: bool,
}

impl Default for SampleCnnConfig {
    fn default() -> Self {
        SampleCnnConfig {
            initial_filters: 64,
            block_filters: vec![64, 64, 128, 128, 256, 256, 512],
            kernel_size: 3,
            block_stride: BLOCK_STRIDE,
            final_filters: FINAL_FILTERS,
            dropout_rate: 0.5,
            num_classes: 2,
            input_len: CHUNK_LEN,
            reduced: false,
        }
    }
}

impl SampleCnnConfig {
    /// A smaller network with the given block widths.
    pub fn reduced(initial_filters: usize, block_filters: Vec<usize>, input_len: usize) -> Self {
        SampleCnnConfig {
            initial_filters,
            block_filters,
            input_len,
            reduced: true,
            ..SampleCnnConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let blocks = self.block_filters.len();
        if !self.reduced && blocks != BLOCK_COUNT {
            return Err(Error::config(format!(
                "expected {BLOCK_COUNT} residual blocks, got {blocks}"
            )));
        }
        if blocks == 0 || blocks > BLOCK_COUNT {
            return Err(Error::config(format!(
                "reduced model needs 1..={BLOCK_COUNT} blocks, got {blocks}"
            )));
        }
        if self.block_stride != BLOCK_STRIDE {
            return Err(Error::config(format!(
                "block stride is fixed at {BLOCK_STRIDE}"
            )));
        }
        if self.final_filters != FINAL_FILTERS {
            return Err(Error::config(format!(
                "final stage must have {FINAL_FILTERS} filters"
            )));
        }
        if !self.reduced && self.dropout_rate != 0.5 {
            return Err(Error::config("dropout rate is fixed at 0.5"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.kernel_size == 0
            || self.initial_filters == 0
            || self.block_filters.contains(&0)
            || self.num_classes < 2
            || self.input_len == 0
        {
            return Err(Error::config(format!(
                "invalid model configuration {self:?}"
            )));
        }
        Ok(())
    }

    /// Time lengths after the stem and after each block.
    pub fn length_chain(&self) -> Vec<usize> {
        let mut chain = vec![self.input_len];
        let mut len = self.input_len;
        for _ in 0..=self.block_filters.len() {
            len = conv_out_len(len, self.block_stride);
            chain.push(len);
        }
        chain
    }

    /// Number of time steps in the final feature map.
    pub fn output_steps(&self) -> usize {
        *self.length_chain().last().unwrap_or(&0)
    }

    pub fn pooled_dim(&self) -> usize {
        2 * self.final_filters
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch size must be positive"));
        }
        self.adam.validate()?;
        self.augment.validate()
    }
}
