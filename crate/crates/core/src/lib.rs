//! Transfer-learned features for speech emotion recognition.
//!
//! The crate bundles two feature extractors and the evaluation protocol that
//! consumes them:
//!
//! * [`samplecnn`]: a raw-waveform residual 1D CNN trained on a binary
//!   speaker-attribute task. Its final 768-channel activations are mean+max
//!   pooled into 1536-dim vectors per 5-second chunk.
//! * [`text`]: a rule-based sentence splitter and mean+max pooling of
//!   externally computed 768-wide token embeddings.
//! * [`svm`] and [`eval`]: standardization, a one-vs-rest linear SVM trained
//!   by dual coordinate descent, a complexity sweep, majority voting per
//!   narrative and Unweighted Average Recall.
//!
//! [`nn`] is the small numeric core (tensors, layers with explicit backward
//! passes, Adam, finite-difference checking) underneath the CNN, and
//! [`audio`] covers WAV decoding, resampling, chunking and augmentation.

pub mod audio;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod samplecnn;
pub mod svm;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};

/// Emotion level used for both the arousal and valence tasks.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low = 0,
    Medium = 1,
    High = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "low" => Ok(Level::Low),
            "medium" => Ok(Level::Medium),
            "high" => Ok(Level::High),
            other => Err(Error::data(format!(
                "unknown label `{other}` (expected low, medium or high)"
            ))),
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Data partition of a corpus entry.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            other => Err(Error::data(format!(
                "unknown partition `{other}` (expected train, dev or test)"
            ))),
        }
    }
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        }
    }
}

/// Stable 64-bit FNV-1a hash, used to derive per-item seeds from string ids.
pub(crate) fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Combines a base seed with a stream identifier (splitmix64 finalizer).
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
