use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::{Error, Level, Partition, Result};

/// A transcript with its partition and (when released) labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Narrative {
    pub narrative_id: String,
    pub partition: Partition,
    /// `(arousal, valence)`; absent for unlabeled partitions.
    pub labels: Option<(Level, Level)>,
    pub text: String,
}

#[derive(Debug, Deserialize)]
struct Row {
    narrative_id: String,
    partition: String,
    label_arousal: String,
    label_valence: String,
    text: String,
}

/// Reads the transcript corpus CSV
/// `narrative_id,partition,label_arousal,label_valence,text`. Empty label
/// cells mean "unlabeled".
pub fn load_transcripts(path: impl AsRef<Path>) -> Result<Vec<Narrative>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let perr = |line: usize, message: String| Error::Parse {
        path: display.clone(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| perr(0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| perr(1, e.to_string()))?
        .clone();
    let expected = [
        "narrative_id",
        "partition",
        "label_arousal",
        "label_valence",
        "text",
    ];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(perr(1, format!("header must be `{}`", expected.join(","))));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| perr(line, e.to_string()))?;
        if !seen.insert(row.narrative_id.clone()) {
            return Err(perr(
                line,
                format!("duplicate narrative id `{}`", row.narrative_id),
            ));
        }
        let labels = match (row.label_arousal.trim(), row.label_valence.trim()) {
            ("", "") => None,
            (a, v) => Some((
                a.parse().map_err(|e: Error| perr(line, e.to_string()))?,
                v.parse().map_err(|e: Error| perr(line, e.to_string()))?,
            )),
        };
        out.push(Narrative {
            narrative_id: row.narrative_id,
            partition: row
                .partition
                .parse()
                .map_err(|e: Error| perr(line, e.to_string()))?,
            labels,
            text: row.text,
        });
    }
    Ok(out)
}
