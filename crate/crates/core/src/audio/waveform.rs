use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{mix_seed, stable_hash, Error, Result};

pub const TARGET_RATE: u32 = 16_000;
/// Five seconds at 16 kHz.
pub const CHUNK_LEN: usize = 80_000;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::data("waveform has no samples"));
        }
        if sample_rate == 0 {
            return Err(Error::data("sample rate must be positive"));
        }
        Ok(Waveform {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn require_16k(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::data(format!(
                "waveform `{}` is empty",
                self.source_id
            )));
        }
        if self.sample_rate != TARGET_RATE {
            return Err(Error::contract(format!(
                "waveform `{}` is at {} Hz, expected {TARGET_RATE}",
                self.source_id, self.sample_rate
            )));
        }
        Ok(())
    }
}

/// A fixed-length window of 16 kHz audio and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioChunk {
    pub samples: Vec<f32>,
    pub source_id: String,
    pub start_sample: usize,
}

impl AudioChunk {
    fn from_window(w: &Waveform, start: usize, len: usize) -> Self {
        let end = (start + len).min(w.samples.len());
        let mut samples = w.samples[start..end].to_vec();
        samples.resize(len, 0.0);
        AudioChunk {
            samples,
            source_id: w.source_id.clone(),
            start_sample: start,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Linear interpolation onto a 16 kHz grid. Output sample `i` sits at
/// source position `i·src_rate/16000`; the last source sample is held past
/// the end.
pub fn resample_16k(w: &Waveform) -> Result<Waveform> {
    if w.sample_rate == TARGET_RATE {
        return Ok(w.clone());
    }
    if w.sample_rate < 4_000 {
        return Err(Error::contract(format!(
            "source rate {} Hz below the supported 4 kHz minimum",
            w.sample_rate
        )));
    }
    let src = u64::from(w.sample_rate);
    let target = u64::from(TARGET_RATE);
    let n = w.samples.len() as u64;
    let out_len = (n * target / src) as usize;
    if out_len == 0 {
        return Err(Error::data(format!(
            "waveform `{}` too short to resample",
            w.source_id
        )));
    }
    let last = w.samples.len() - 1;
    let samples = (0..out_len as u64)
        .map(|i| {
            let pos = i * src;
            let idx = (pos / target) as usize;
            let frac = (pos % target) as f64 / target as f64;
            let a = f64::from(w.samples[idx.min(last)]);
            let b = f64::from(w.samples[(idx + 1).min(last)]);
            (a + frac * (b - a)) as f32
        })
        .collect();
    Waveform::new(samples, TARGET_RATE, w.source_id.clone())
}

/// A random `chunk_len` window. The start is uniform in
/// `[0, len − chunk_len]` and depends only on `(seed, source_id)`; shorter
/// inputs are zero-padded at the end.
pub fn extract_random_chunk(w: &Waveform, chunk_len: usize, seed: u64) -> Result<AudioChunk> {
    w.require_16k()?;
    let start = if w.len() > chunk_len {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, stable_hash(&w.source_id)));
        rng.gen_range(0..=w.len() - chunk_len)
    } else {
        0
    };
    Ok(AudioChunk::from_window(w, start, chunk_len))
}

/// Consecutive non-overlapping windows; the last one is zero-padded.
pub fn split_chunks(w: &Waveform, chunk_len: usize) -> Result<Vec<AudioChunk>> {
    w.require_16k()?;
    if chunk_len == 0 {
        return Err(Error::contract("chunk length must be positive"));
    }
    Ok((0..w.len().div_ceil(chunk_len))
        .map(|i| AudioChunk::from_window(w, i * chunk_len, chunk_len))
        .collect())
}

/// Subtracts the chunk's own mean. No variance scaling.
pub fn normalize_local(c: &AudioChunk) -> AudioChunk {
    let mean = c.samples.iter().map(|&v| f64::from(v)).sum::<f64>() / c.samples.len().max(1) as f64;
    let mut out = c.clone();
    for v in &mut out.samples {
        *v = (f64::from(*v) - mean) as f32;
    }
    out
}
