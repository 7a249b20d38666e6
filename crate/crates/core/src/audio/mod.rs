//! Audio input: WAV decoding, resampling to 16 kHz, fixed-length chunking,
//! training-time augmentation and the dataset index.

mod augment;
mod dataset;
mod wav;
mod waveform;

pub use augment::{augment, AugmentConfig};
pub use dataset::{
    batch_iter, Batch, BatchIter, DatasetEntry, DatasetIndex, LabelColumn, LabeledClip,
};
pub use wav::{decode_wav, load_wav, write_wav, WavEncoding};
pub use waveform::{
    extract_random_chunk, normalize_local, resample_16k, split_chunks, AudioChunk, Waveform,
    CHUNK_LEN, TARGET_RATE,
};
