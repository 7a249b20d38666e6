use super::{TokenEmbeddingSequence, EMBED_DIM};
use crate::samplecnn::sorted_mean_max;
use crate::{Error, Result};

/// Mean ++ max pooled sentence representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceFeature {
    pub narrative_id: String,
    pub sentence_index: usize,
    pub vector: Vec<f32>,
}

/// Per-dimension mean over tokens in `0..768`, per-dimension max in
/// `768..1536`. Independent of token order.
pub fn pool_sentence(seq: &TokenEmbeddingSequence) -> Result<SentenceFeature> {
    if seq.n_tokens == 0 || seq.values.len() != seq.n_tokens * EMBED_DIM {
        return Err(Error::data(format!(
            "sentence {}/{} has no tokens",
            seq.narrative_id, seq.sentence_index
        )));
    }
    let mut vector = vec![0.0f32; 2 * EMBED_DIM];
    let mut column = vec![0.0f32; seq.n_tokens];
    for d in 0..EMBED_DIM {
        for (t, v) in column.iter_mut().enumerate() {
            *v = seq.values[t * EMBED_DIM + d];
        }
        let (mean, max) = sorted_mean_max(&mut column);
        vector[d] = mean;
        vector[EMBED_DIM + d] = max;
    }
    Ok(SentenceFeature {
        narrative_id: seq.narrative_id.clone(),
        sentence_index: seq.sentence_index,
        vector,
    })
}
