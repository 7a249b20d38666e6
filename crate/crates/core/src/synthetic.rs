//! Synthetic corpora for smoke runs and the acceptance suite.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::{write_wav, WavEncoding, TARGET_RATE};
use crate::text::EMBED_DIM;
use crate::{mix_seed, Error, Level, Result};

/// Sawtooth at `f0` Hz with random phase and additive Gaussian noise.
pub fn sawtooth<R: Rng + ?Sized>(
    f0: f64,
    len: usize,
    amplitude: f64,
    noise_std: f64,
    rng: &mut R,
) -> Vec<f32> {
    let phase: f64 = rng.gen();
    let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite std");
    (0..len)
        .map(|i| {
            let t = i as f64 / f64::from(TARGET_RATE);
            let cycle = (f0 * t + phase).fract();
            let v = amplitude * (2.0 * cycle - 1.0) + noise.sample(rng);
            v.clamp(-1.0, 1.0) as f32
        })
        .collect()
}

/// Fundamental frequency range of the low-pitch (class A) and high-pitch
/// (class B) clips.
pub const LOW_PITCH_HZ: (f64, f64) = (100.0, 150.0);
pub const HIGH_PITCH_HZ: (f64, f64) = (220.0, 300.0);

/// Writes a two-class pitch corpus: `low` clips are sawtooths with
/// f0 in [100, 150] Hz, `high` clips in [220, 300] Hz. Returns the index
/// path. The class lives in `label_arousal`; `label_valence` mirrors it.
pub fn write_pitch_corpus(
    dir: &Path,
    n_train: usize,
    n_dev: usize,
    clip_len: usize,
    seed: u64,
) -> Result<PathBuf> {
    let audio = dir.join("audio");
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let mut index = String::from("path,speaker_id,label_arousal,label_valence,partition\n");
    for (partition, count, offset) in [("train", n_train, 0u64), ("dev", n_dev, 1u64 << 40)] {
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, offset + i as u64));
            let high = i % 2 == 1;
            let (lo, hi) = if high { HIGH_PITCH_HZ } else { LOW_PITCH_HZ };
            let f0 = rng.gen_range(lo..=hi);
            let amp = rng.gen_range(0.3..0.8);
            let samples = sawtooth(f0, clip_len, amp, 0.02, &mut rng);
            let name = format!("{partition}_{i:05}.wav");
            write_wav(audio.join(&name), &samples, TARGET_RATE, WavEncoding::Pcm16)?;
            let label = if high { "high" } else { "low" };
            let speaker = format!("{partition}-spk{}", i % 10);
            writeln!(index, "audio/{name},{speaker},{label},{label},{partition}")
                .expect("string write");
        }
    }
    let path = dir.join("index.csv");
    fs::write(&path, index).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Files written by [`write_emotion_corpus`].
#[derive(Debug, Clone)]
pub struct EmotionCorpus {
    pub audio_index: PathBuf,
    pub transcripts: PathBuf,
    pub embeddings: PathBuf,
}

const WORDS: [[&str; 3]; 3] = [
    ["traurig", "schwer", "allein"],
    ["ruhig", "normal", "alltag"],
    ["froh", "schoen", "gluecklich"],
];

/// A small labelled narrative corpus with matching audio, transcripts and
/// token embeddings.
///
/// Narratives alternate over the three levels. Audio pitch rises with
/// arousal; embedding offsets and transcript words follow valence. Two
/// thirds of the speakers go to train, the rest to dev.
pub fn write_emotion_corpus(
    dir: &Path,
    narratives: usize,
    chunk_len: usize,
    chunks_per_narrative: usize,
    seed: u64,
) -> Result<EmotionCorpus> {
    let audio = dir.join("audio");
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let mut index = String::from("path,speaker_id,label_arousal,label_valence,partition\n");
    let mut transcripts = String::from("narrative_id,partition,label_arousal,label_valence,text\n");
    let mut embeddings = String::from("narrative_id\tsentence_index\ttoken_index");
    for d in 0..EMBED_DIM {
        write!(embeddings, "\te{d:04}").expect("string write");
    }
    embeddings.push('\n');

    let split = (narratives * 2).div_ceil(3);
    for n in 0..narratives {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, n as u64));
        let arousal = Level::ALL[n % 3];
        let valence = Level::ALL[(n / 3 + n) % 3];
        let partition = if n < split { "train" } else { "dev" };
        let id = format!("nar{n:03}");

        let f0 = 110.0 + 90.0 * arousal.index() as f64 + rng.gen_range(-10.0..10.0);
        let samples = sawtooth(
            f0,
            chunk_len * chunks_per_narrative - chunk_len / 3,
            0.5,
            0.02,
            &mut rng,
        );
        write_wav(
            audio.join(format!("{id}.wav")),
            &samples,
            TARGET_RATE,
            WavEncoding::Pcm16,
        )?;
        writeln!(
            index,
            "audio/{id}.wav,spk{n:03},{arousal},{valence},{partition}"
        )
        .expect("string write");

        let sentences = 2 + n % 3;
        let mut text = String::new();
        for s in 0..sentences {
            let w = WORDS[valence.index()][(n + s) % 3];
            write!(text, "Das war {w}, sagte sie. ").expect("string write");
        }
        writeln!(
            transcripts,
            "{id},{partition},{arousal},{valence},\"{}\"",
            text.trim().replace('"', "\"\"")
        )
        .expect("string write");

        let noise = Normal::new(0.0, 0.5).expect("finite std");
        for s in 0..sentences {
            let tokens = 3 + (n + s) % 4;
            for t in 0..tokens {
                write!(embeddings, "{id}\t{s}\t{t}").expect("string write");
                for d in 0..EMBED_DIM {
                    let center = if d % 3 == valence.index() { 1.0 } else { 0.0 };
                    let v: f64 = center + noise.sample(&mut rng);
                    write!(embeddings, "\t{}", v as f32).expect("string write");
                }
                embeddings.push('\n');
            }
        }
    }

    let result = EmotionCorpus {
        audio_index: dir.join("index.csv"),
        transcripts: dir.join("transcripts.csv"),
        embeddings: dir.join("embeddings.tsv"),
    };
    for (path, body) in [
        (&result.audio_index, index),
        (&result.transcripts, transcripts),
        (&result.embeddings, embeddings),
    ] {
        fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(result)
}
