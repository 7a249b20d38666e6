use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{
    augment, extract_random_chunk, load_wav, normalize_local, resample_16k, AugmentConfig,
};
use crate::nn::Tensor;
use crate::{mix_seed, Error, Level, Partition, Result};

/// One row of the audio dataset index.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub speaker_id: String,
    pub arousal: Level,
    pub valence: Level,
    pub partition: Partition,
    /// Narrative grouping key. Taken from the optional `narrative_id`
    /// column, else the file stem.
    pub narrative_id: String,
}

impl DatasetEntry {
    pub fn label(&self, column: LabelColumn) -> Level {
        match column {
            LabelColumn::Arousal => self.arousal,
            LabelColumn::Valence => self.valence,
        }
    }
}

/// Which label column a task reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LabelColumn {
    Arousal,
    Valence,
}

impl LabelColumn {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelColumn::Arousal => "arousal",
            LabelColumn::Valence => "valence",
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "arousal" => Ok(LabelColumn::Arousal),
            "valence" => Ok(LabelColumn::Valence),
            other => Err(Error::config(format!(
                "unknown task `{other}` (expected arousal or valence)"
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    path: String,
    speaker_id: String,
    label_arousal: String,
    label_valence: String,
    partition: String,
    #[serde(default)]
    narrative_id: Option<String>,
}

/// The audio corpus index: a CSV with header
/// `path,speaker_id,label_arousal,label_valence,partition` and an optional
/// trailing `narrative_id` column. Relative paths resolve against the
/// index file's directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
}

impl DatasetIndex {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let display = path.display().to_string();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: display.clone(),
            line,
            message,
        };

        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let expected = [
            "path",
            "speaker_id",
            "label_arousal",
            "label_valence",
            "partition",
        ];
        if headers.len() < 5 || headers.iter().take(5).ne(expected.iter().copied()) {
            return Err(parse_err(
                1,
                format!("header must start with `{}`", expected.join(",")),
            ));
        }

        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<IndexRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| parse_err(line, e.to_string()))?;
            let rel = PathBuf::from(&row.path);
            let full = if rel.is_absolute() {
                rel
            } else {
                base.join(rel)
            };
            let narrative_id = match row.narrative_id.filter(|s| !s.is_empty()) {
                Some(id) => id,
                None => full
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| {
                        parse_err(
                            line,
                            format!("cannot derive a narrative id from `{}`", row.path),
                        )
                    })?,
            };
            entries.push(DatasetEntry {
                path: full,
                speaker_id: row.speaker_id,
                arousal: row
                    .label_arousal
                    .parse()
                    .map_err(|e: Error| parse_err(line, e.to_string()))?,
                valence: row
                    .label_valence
                    .parse()
                    .map_err(|e: Error| parse_err(line, e.to_string()))?,
                partition: row
                    .partition
                    .parse()
                    .map_err(|e: Error| parse_err(line, e.to_string()))?,
                narrative_id,
            });
        }
        Ok(DatasetIndex { entries })
    }

    pub fn partition(&self, p: Partition) -> Vec<&DatasetEntry> {
        self.entries.iter().filter(|e| e.partition == p).collect()
    }

    /// Fails if any speaker appears in more than one partition.
    pub fn check_speaker_disjoint(&self) -> Result<()> {
        let mut seen: BTreeMap<&str, Partition> = BTreeMap::new();
        for e in &self.entries {
            if let Some(&p) = seen.get(e.speaker_id.as_str()) {
                if p != e.partition {
                    return Err(Error::data(format!(
                        "speaker `{}` appears in both {} and {}",
                        e.speaker_id,
                        p.as_str(),
                        e.partition.as_str()
                    )));
                }
            } else {
                seen.insert(&e.speaker_id, e.partition);
            }
        }
        Ok(())
    }
}

/// A training clip with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub path: PathBuf,
    pub source_id: String,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// `B×chunk_len×1`
    pub input: Tensor<f32>,
    pub labels: Vec<usize>,
    pub source_ids: Vec<String>,
}

/// One epoch of shuffled, augmented, normalized batches.
///
/// Every clip goes through random chunk extraction, optional augmentation
/// and local mean removal. Unreadable files are skipped with a warning and
/// counted in [`BatchIter::skipped`].
pub struct BatchIter<'a> {
    clips: &'a [LabeledClip],
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    chunk_len: usize,
    augment: Option<AugmentConfig>,
    seed: u64,
    epoch: u64,
    skipped: Vec<String>,
}

pub fn batch_iter<'a>(
    clips: &'a [LabeledClip],
    batch_size: usize,
    chunk_len: usize,
    augment: Option<AugmentConfig>,
    seed: u64,
    epoch: u64,
) -> Result<BatchIter<'a>> {
    if batch_size == 0 || chunk_len == 0 {
        return Err(Error::config(
            "batch size and chunk length must be positive",
        ));
    }
    let mut order: Vec<usize> = (0..clips.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, epoch));
    order.shuffle(&mut rng);
    Ok(BatchIter {
        clips,
        order,
        pos: 0,
        batch_size,
        chunk_len,
        augment,
        seed,
        epoch,
        skipped: Vec::new(),
    })
}

impl BatchIter<'_> {
    /// Paths of files that failed to load so far.
    pub fn skipped(&self) -> &[String] {
        &self.skipped
    }

    fn prepare(&self, clip_index: usize) -> Result<Vec<f32>> {
        let clip = &self.clips[clip_index];
        let wave = resample_16k(&load_wav(&clip.path)?)?;
        let wave = crate::audio::Waveform {
            source_id: clip.source_id.clone(),
            ..wave
        };
        let chunk = extract_random_chunk(&wave, self.chunk_len, mix_seed(self.seed, self.epoch))?;
        let chunk = match &self.augment {
            Some(cfg) => {
                let draw = mix_seed(self.epoch, clip_index as u64);
                augment(&chunk, cfg, draw)
            }
            None => chunk,
        };
        Ok(normalize_local(&chunk).samples)
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        loop {
            if self.pos >= self.order.len() {
                if !self.skipped.is_empty() {
                    warn!(
                        "epoch {}: skipped {} unreadable file(s)",
                        self.epoch,
                        self.skipped.len()
                    );
                }
                return None;
            }
            let end = (self.pos + self.batch_size).min(self.order.len());
            let picked = self.order[self.pos..end].to_vec();
            self.pos = end;

            let prepared: Vec<(usize, Result<Vec<f32>>)> =
                picked.par_iter().map(|&i| (i, self.prepare(i))).collect();
            let mut data = Vec::with_capacity(picked.len() * self.chunk_len);
            let mut labels = Vec::new();
            let mut ids = Vec::new();
            for (i, res) in prepared {
                match res {
                    Ok(samples) => {
                        data.extend(samples);
                        labels.push(self.clips[i].label);
                        ids.push(self.clips[i].source_id.clone());
                    }
                    Err(e) => {
                        warn!("skipping {}: {e}", self.clips[i].path.display());
                        self.skipped.push(self.clips[i].path.display().to_string());
                    }
                }
            }
            if labels.is_empty() {
                continue;
            }
            let input = Tensor::new(vec![labels.len(), self.chunk_len, 1], data).ok()?;
            return Some(Batch {
                input,
                labels,
                source_ids: ids,
            });
        }
    }
}
