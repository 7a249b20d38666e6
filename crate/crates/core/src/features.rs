//! Per-unit feature vectors and their CSV file format.
//!
//! Header: `narrative_id,chunk_index,f0000,...,f1535`. One row per unit
//! (audio chunk or sentence), '.' as decimal separator.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// Length of every pooled feature vector (mean ++ max of 768 channels).
pub const FEATURE_DIM: usize = 1536;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub narrative_id: String,
    /// Chunk index for audio, sentence index for text.
    pub unit_index: usize,
    pub vector: Vec<f32>,
}

pub fn write_features_csv(path: impl AsRef<Path>, rows: &[FeatureRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let dim = rows.first().map_or(FEATURE_DIM, |r| r.vector.len());
    let mut header = String::from("narrative_id,chunk_index");
    for i in 0..dim {
        header.push_str(&format!(",f{i:04}"));
    }
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        if row.vector.len() != dim {
            return Err(Error::contract(format!(
                "feature row {}/{} has {} values, expected {dim}",
                row.narrative_id,
                row.unit_index,
                row.vector.len()
            )));
        }
        if row.narrative_id.contains([',', '"', '\n']) {
            return Err(Error::data(format!(
                "narrative id `{}` contains a CSV delimiter",
                row.narrative_id
            )));
        }
        let mut line = format!("{},{}", row.narrative_id, row.unit_index);
        for v in &row.vector {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let perr = |line: usize, message: String| Error::Parse {
        path: display.clone(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| perr(0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| perr(1, e.to_string()))?
        .clone();
    if headers.len() < 3 || &headers[0] != "narrative_id" || &headers[1] != "chunk_index" {
        return Err(perr(
            1,
            "header must start with `narrative_id,chunk_index`".into(),
        ));
    }
    let dim = headers.len() - 2;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| perr(line, e.to_string()))?;
        if record.len() != dim + 2 {
            return Err(perr(
                line,
                format!("expected {} columns, found {}", dim + 2, record.len()),
            ));
        }
        let unit_index = record[1]
            .parse()
            .map_err(|_| perr(line, format!("bad chunk index `{}`", &record[1])))?;
        let vector = record
            .iter()
            .skip(2)
            .map(|c| {
                c.parse::<f32>()
                    .map_err(|_| perr(line, format!("non-numeric value `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            narrative_id: record[0].to_string(),
            unit_index,
            vector,
        });
    }
    Ok(rows)
}
