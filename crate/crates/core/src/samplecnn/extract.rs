use std::collections::BTreeMap;
use std::path::PathBuf;

use log::warn;
use rayon::prelude::*;

use super::{pool_features, SampleCnnModel};
use crate::audio::{load_wav, normalize_local, resample_16k, split_chunks};
use crate::features::FeatureRow;
use crate::nn::Tensor;
use crate::Result;

/// Chunks fed through the network at once.
const EXTRACT_BATCH: usize = 8;

/// An audio file and the narrative it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NarrativeFile {
    pub narrative_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionReport {
    /// Sorted by `(narrative_id, unit_index)`.
    pub rows: Vec<FeatureRow>,
    /// `(path, error)` for every file that failed.
    pub failures: Vec<(PathBuf, String)>,
}

fn file_vectors(model: &SampleCnnModel<f32>, path: &PathBuf) -> Result<Vec<Vec<f32>>> {
    let wave = resample_16k(&load_wav(path)?)?;
    let chunks = split_chunks(&wave, model.config.input_len)?;
    let dim = model.config.pooled_dim();
    let mut out = Vec::with_capacity(chunks.len());
    for group in chunks.chunks(EXTRACT_BATCH) {
        let mut data = Vec::with_capacity(group.len() * model.config.input_len);
        for c in group {
            data.extend(normalize_local(c).samples);
        }
        let batch = Tensor::new(vec![group.len(), model.config.input_len, 1], data)?;
        let pooled = pool_features(&model.features(&batch)?)?;
        out.extend(pooled.data().chunks_exact(dim).map(<[f32]>::to_vec));
    }
    Ok(out)
}

/// One pooled 1536-dim vector per 5-second chunk of every file.
///
/// Files are resampled, split into consecutive chunks, mean-normalized and
/// run through the network in inference mode. Chunk indices run across all
/// files of a narrative in input order. A failing file is reported and
/// skipped.
pub fn extract_features(model: &SampleCnnModel<f32>, files: &[NarrativeFile]) -> ExtractionReport {
    let results: Vec<Result<Vec<Vec<f32>>>> = files
        .par_iter()
        .map(|f| file_vectors(model, &f.path))
        .collect();
    let mut report = ExtractionReport::default();
    let mut next_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (file, res) in files.iter().zip(results) {
        match res {
            Ok(vectors) => {
                let idx = next_index.entry(&file.narrative_id).or_insert(0);
                for v in vectors {
                    report.rows.push(FeatureRow {
                        narrative_id: file.narrative_id.clone(),
                        unit_index: *idx,
                        vector: v,
                    });
                    *idx += 1;
                }
            }
            Err(e) => {
                warn!("feature extraction failed for {}: {e}", file.path.display());
                report.failures.push((file.path.clone(), e.to_string()));
            }
        }
    }
    report
        .rows
        .sort_by(|a, b| (&a.narrative_id, a.unit_index).cmp(&(&b.narrative_id, b.unit_index)));
    report
}
