use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

/// Width of the encoder output the pooling expects.
pub const EMBED_DIM: usize = 768;

/// Token embeddings of one sentence, `n_tokens × 768` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSequence {
    pub narrative_id: String,
    pub sentence_index: usize,
    pub n_tokens: usize,
    pub values: Vec<f32>,
}

impl TokenEmbeddingSequence {
    pub fn token(&self, t: usize) -> &[f32] {
        &self.values[t * EMBED_DIM..(t + 1) * EMBED_DIM]
    }
}

pub fn load_token_embeddings(path: impl AsRef<Path>) -> Result<Vec<TokenEmbeddingSequence>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_token_embeddings(&text, &path.display().to_string())
}

/// Parses the embedding TSV:
/// `narrative_id\tsentence_index\ttoken_index\te0000..e0767`.
///
/// Rows are grouped by `(narrative_id, sentence_index)` and ordered by
/// `token_index` within a sentence. The output is sorted by narrative id
/// and sentence index.
pub fn parse_token_embeddings(text: &str, source: &str) -> Result<Vec<TokenEmbeddingSequence>> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 3 || cols[..3] != ["narrative_id", "sentence_index", "token_index"] {
        return Err(err(
            1,
            "header must start with narrative_id, sentence_index, token_index".into(),
        ));
    }
    if cols.len() - 3 != EMBED_DIM {
        return Err(err(
            1,
            format!(
                "expected {EMBED_DIM} embedding columns, header has {}",
                cols.len() - 3
            ),
        ));
    }
    for (d, name) in cols[3..].iter().enumerate() {
        if *name != format!("e{d:04}") {
            return Err(err(1, format!("embedding column {d} is named `{name}`")));
        }
    }

    let mut groups: BTreeMap<(String, usize), BTreeMap<usize, Vec<f32>>> = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != EMBED_DIM + 3 {
            return Err(err(
                line_no,
                format!(
                    "expected {} columns, found {} ({} values)",
                    EMBED_DIM + 3,
                    cells.len(),
                    cells.len().saturating_sub(3)
                ),
            ));
        }
        let sentence: usize = cells[1]
            .parse()
            .map_err(|_| err(line_no, format!("bad sentence index `{}`", cells[1])))?;
        let token: usize = cells[2]
            .parse()
            .map_err(|_| err(line_no, format!("bad token index `{}`", cells[2])))?;
        let values = cells[3..]
            .iter()
            .map(|c| match c.parse::<f32>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(err(line_no, format!("non-numeric embedding value `{c}`"))),
            })
            .collect::<Result<Vec<f32>>>()?;
        let tokens = groups.entry((cells[0].to_string(), sentence)).or_default();
        if tokens.insert(token, values).is_some() {
            return Err(err(
                line_no,
                format!("duplicate key ({}, {sentence}, {token})", cells[0]),
            ));
        }
    }

    Ok(groups
        .into_iter()
        .map(
            |((narrative_id, sentence_index), tokens)| TokenEmbeddingSequence {
                narrative_id,
                sentence_index,
                n_tokens: tokens.len(),
                values: tokens.into_values().flatten().collect(),
            },
        )
        .collect())
}
