use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::{Branch, ConfusionMatrix, ExperimentConfig, PredictionRecord};
use crate::audio::{DatasetIndex, LabelColumn};
use crate::features::{read_features_csv, FeatureRow};
use crate::samplecnn::{extract_features, load_checkpoint, NarrativeFile};
use crate::svm::{
    save_svm_model, sweep_c, train_ovr, Selection, Standardizer, SvmConfig, SvmModel, SweepOptions,
    SweepRow, Unit,
};
use crate::text::{load_token_embeddings, load_transcripts, pool_sentence};
use crate::{Error, Level, Partition, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Partition and class of every labeled narrative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    pub narratives: BTreeMap<String, (Partition, Level)>,
}

impl LabelTable {
    fn insert(&mut self, id: &str, partition: Partition, level: Level) -> Result<()> {
        match self.narratives.get(id) {
            Some(&prev) if prev != (partition, level) => Err(Error::data(format!(
                "narrative `{id}` has inconsistent labels or partitions across files"
            ))),
            _ => {
                self.narratives.insert(id.to_string(), (partition, level));
                Ok(())
            }
        }
    }

    pub fn from_index(index: &DatasetIndex, task: LabelColumn) -> Result<Self> {
        index.check_speaker_disjoint()?;
        let mut table = Self::default();
        for e in &index.entries {
            table.insert(&e.narrative_id, e.partition, e.label(task))?;
        }
        Ok(table)
    }

    /// Labels from the index for the acoustic branch, from the
    /// transcripts for the linguistic one.
    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        match (cfg.branch, &cfg.index, &cfg.transcripts) {
            (Branch::Acoustic, Some(index), _) => {
                Self::from_index(&DatasetIndex::load(index)?, cfg.task)
            }
            (Branch::Linguistic, _, Some(t)) => Self::from_transcripts(t, cfg.task),
            (Branch::Acoustic, None, _) => Err(Error::config("acoustic labels need `index`")),
            (Branch::Linguistic, _, None) => {
                Err(Error::config("linguistic labels need `transcripts`"))
            }
        }
    }

    pub fn from_transcripts(path: &Path, task: LabelColumn) -> Result<Self> {
        let mut table = Self::default();
        for n in load_transcripts(path)? {
            match n.labels {
                Some((a, v)) => {
                    let level = if task == LabelColumn::Arousal { a } else { v };
                    table.insert(&n.narrative_id, n.partition, level)?;
                }
                None if n.partition == Partition::Test => {}
                None => {
                    return Err(Error::data(format!(
                        "{} narrative `{}` has no labels",
                        n.partition.as_str(),
                        n.narrative_id
                    )))
                }
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub train_narratives: usize,
    pub dev_narratives: usize,
    pub train_units: usize,
    pub dev_units: usize,
}

/// Machine-readable experiment outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: String,
    pub branch: String,
    pub c_table: Vec<SweepRow>,
    pub best_c: f64,
    pub selection: Selection,
    pub classes: Vec<String>,
    /// Narrative-level dev confusion of the selected model.
    pub confusion: ConfusionMatrix,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub config: BTreeMap<String, String>,
    pub counts: Counts,
}

impl Report {
    pub fn best_index(&self) -> usize {
        self.c_table
            .iter()
            .position(|r| r.c == self.best_c)
            .unwrap_or(0)
    }

    /// Aligned text rendering; the selected cell is bracketed.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let best = self.best_index();
        let _ = writeln!(s, "task: {}  branch: {}", self.task, self.branch);
        let _ = writeln!(
            s,
            "train: {} narratives / {} units  dev: {} narratives / {} units",
            self.counts.train_narratives,
            self.counts.train_units,
            self.counts.dev_narratives,
            self.counts.dev_units
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>8}  {:>10}  {:>12}", "C", "UAR dev %", "pre-vote %");
        for (i, r) in self.c_table.iter().enumerate() {
            let cell = |v: f64, selected: bool| {
                if selected && i == best {
                    format!("[{:.1}]", 100.0 * v)
                } else {
                    format!("{:.1} ", 100.0 * v)
                }
            };
            let _ = writeln!(
                s,
                "{:>8}  {:>10}  {:>12}",
                format!("{:e}", r.c),
                cell(r.uar_dev, self.selection == Selection::PostVote),
                cell(r.uar_dev_prevote, self.selection == Selection::PreVote),
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "best C: {:e}", self.best_c);
        let _ = writeln!(s, "confusion (rows truth, columns prediction):");
        let _ = write!(s, "{:>8}", "");
        for c in &self.classes {
            let _ = write!(s, "{c:>8}");
        }
        let _ = writeln!(s);
        for (c, row) in self.classes.iter().zip(&self.confusion.counts) {
            let _ = write!(s, "{c:>8}");
            for v in row {
                let _ = write!(s, "{v:>8}");
            }
            let _ = writeln!(s);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Outputs of [`run_experiment`] besides the report files.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: Report,
    pub model: SvmModel,
    pub dev_records: Vec<PredictionRecord>,
}

fn acoustic_rows(
    cfg: &ExperimentConfig,
    index: &DatasetIndex,
    seeds: &mut BTreeMap<String, u64>,
) -> Result<Vec<FeatureRow>> {
    let ckpt_path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::config("acoustic branch needs `checkpoint`"))?;
    let ckpt = load_checkpoint(ckpt_path)?;
    if let Some(t) = &ckpt.training {
        seeds.insert("pretrain".into(), t.config.seed);
    }
    let files: Vec<NarrativeFile> = index
        .entries
        .iter()
        .filter(|e| e.partition != Partition::Test)
        .map(|e| NarrativeFile {
            narrative_id: e.narrative_id.clone(),
            path: e.path.clone(),
        })
        .collect();
    info!("extracting acoustic features from {} files", files.len());
    let report = extract_features(&ckpt.model, &files);
    if !report.failures.is_empty() {
        let list: Vec<String> = report
            .failures
            .iter()
            .map(|(p, e)| format!("{}: {e}", p.display()))
            .collect();
        return Err(Error::data(format!(
            "unreadable audio: {}",
            list.join("; ")
        )));
    }
    Ok(report.rows)
}

fn linguistic_rows(path: &Path) -> Result<Vec<FeatureRow>> {
    load_token_embeddings(path)?
        .iter()
        .map(|seq| {
            let f = pool_sentence(seq)?;
            Ok(FeatureRow {
                narrative_id: f.narrative_id,
                unit_index: f.sentence_index,
                vector: f.vector,
            })
        })
        .collect()
}

/// Joins feature rows with their labels and splits them into train and
/// dev units. Test rows are dropped.
pub fn split_units(rows: Vec<FeatureRow>, labels: &LabelTable) -> Result<(Vec<Unit>, Vec<Unit>)> {
    let mut train = Vec::new();
    let mut dev = Vec::new();
    let mut unknown = BTreeSet::new();
    for row in rows {
        let Some(&(partition, level)) = labels.narratives.get(&row.narrative_id) else {
            unknown.insert(row.narrative_id);
            continue;
        };
        let unit = Unit {
            narrative_id: row.narrative_id,
            unit_index: row.unit_index,
            label: level.index(),
            features: row.vector.iter().map(|&v| f64::from(v)).collect(),
        };
        match partition {
            Partition::Train => train.push(unit),
            Partition::Dev => dev.push(unit),
            Partition::Test => {}
        }
    }
    if !unknown.is_empty() {
        return Err(Error::data(format!(
            "features for narratives without labels: {}",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let covered: BTreeSet<&str> = train
        .iter()
        .chain(&dev)
        .map(|u| u.narrative_id.as_str())
        .collect();
    let missing: Vec<&str> = labels
        .narratives
        .iter()
        .filter(|(id, (p, _))| *p != Partition::Test && !covered.contains(id.as_str()))
        .map(|(id, _)| id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::data(format!(
            "labeled narratives without features: {}",
            missing.join(", ")
        )));
    }
    Ok((train, dev))
}

/// Features, standardization, C sweep, vote and report.
///
/// Writes `report.json`, `report.txt`, `svm_model.json` and
/// `dev_predictions.csv` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut seeds = BTreeMap::from([("svm".to_string(), cfg.seed)]);

    let (labels, rows) = match cfg.branch {
        Branch::Acoustic => {
            let index = DatasetIndex::load(cfg.index.as_ref().expect("validated"))?;
            let labels = LabelTable::from_index(&index, cfg.task)?;
            let rows = match &cfg.features {
                Some(p) => read_features_csv(p)?,
                None => acoustic_rows(cfg, &index, &mut seeds)?,
            };
            (labels, rows)
        }
        Branch::Linguistic => {
            let labels = LabelTable::from_transcripts(
                cfg.transcripts.as_ref().expect("validated"),
                cfg.task,
            )?;
            let rows = match &cfg.features {
                Some(p) => read_features_csv(p)?,
                None => linguistic_rows(cfg.embeddings.as_ref().expect("validated"))?,
            };
            (labels, rows)
        }
    };
    let (train, dev) = split_units(rows, &labels)?;
    info!("{} train units, {} dev units", train.len(), dev.len());

    let classes: Vec<String> = Level::ALL.iter().map(|l| l.as_str().to_string()).collect();
    let svm = SvmConfig {
        c: cfg.c_list[0],
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations,
        seed: cfg.seed,
        class_weighting: cfg.class_weighting,
    };
    let opts = SweepOptions {
        c_list: cfg.c_list.clone(),
        svm: svm.clone(),
        classes: classes.clone(),
        uar_mode: cfg.uar_mode,
        selection: cfg.selection,
    };
    let sweep = sweep_c(&train, &dev, &opts)?;
    let best_c = sweep.rows[sweep.best].c;

    let model = if cfg.train_plus_dev {
        let all: Vec<&Unit> = train.iter().chain(&dev).collect();
        let x: Vec<Vec<f64>> = all.iter().map(|u| u.features.clone()).collect();
        let y: Vec<usize> = all.iter().map(|u| u.label).collect();
        let st = Standardizer::fit(&x)?;
        let linear = train_ovr(&st.apply_rows(&x)?, &y, classes.len(), &svm.with_c(best_c))?;
        SvmModel::new(classes.clone(), best_c, cfg.class_weighting, st, linear)
    } else {
        sweep.best_model.clone()
    };

    let narratives = |units: &[Unit]| {
        units
            .iter()
            .map(|u| u.narrative_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    };
    let report = Report {
        task: cfg.task.as_str().to_string(),
        branch: cfg.branch.as_str().to_string(),
        c_table: sweep.rows.clone(),
        best_c,
        selection: cfg.selection,
        classes,
        confusion: sweep.best_confusion.clone(),
        seeds,
        versions: BTreeMap::from([
            ("emofeat".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            (
                "report_format".to_string(),
                REPORT_FORMAT_VERSION.to_string(),
            ),
        ]),
        config: cfg.echo(),
        counts: Counts {
            train_narratives: narratives(&train),
            dev_narratives: narratives(&dev),
            train_units: train.len(),
            dev_units: dev.len(),
        },
    };

    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, body: String| {
        let p = out.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("report.json", report.to_json()?)?;
    write("report.txt", report.to_text())?;
    write(
        "dev_predictions.csv",
        predictions_csv(&sweep.best_records, &report.classes),
    )?;
    save_svm_model(&model, out.join("svm_model.json"))?;

    Ok(ExperimentOutcome {
        report,
        model,
        dev_records: sweep.best_records,
    })
}

/// `narrative_id,unit_index,predicted,score_<class>...`
pub fn predictions_csv(records: &[PredictionRecord], classes: &[String]) -> String {
    let mut s = String::from("narrative_id,unit_index,predicted");
    for c in classes {
        let _ = write!(s, ",score_{c}");
    }
    s.push('\n');
    for r in records {
        let _ = write!(
            s,
            "{},{},{}",
            r.narrative_id, r.unit_index, classes[r.predicted]
        );
        for v in &r.scores {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::write_emotion_corpus;

    #[test]
    fn linguistic_report_structure_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = write_emotion_corpus(dir.path(), 12, 2187, 2, 5).unwrap();
        let cfg = ExperimentConfig {
            task: LabelColumn::Valence,
            branch: Branch::Linguistic,
            transcripts: Some(corpus.transcripts.clone()),
            embeddings: Some(corpus.embeddings.clone()),
            out: dir.path().join("out"),
            ..Default::default()
        };
        let a = run_experiment(&cfg).unwrap();
        let first = std::fs::read(cfg.out.join("report.json")).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(first, std::fs::read(cfg.out.join("report.json")).unwrap());
        assert_eq!(a.report, b.report);
        assert_eq!(a.report.c_table.len(), 6);
        assert_eq!(a.report.confusion.total(), 4);
        assert!(a.report.c_table.iter().any(|r| r.uar_dev > 1.0 / 3.0));
        let text = a.report.to_text();
        assert_eq!(text.matches('[').count(), 1, "{text}");
    }

    #[test]
    fn unlabeled_features_rejected() {
        let labels = LabelTable::default();
        let rows = vec![FeatureRow {
            narrative_id: "x".into(),
            unit_index: 0,
            vector: vec![0.0; 4],
        }];
        assert!(split_units(rows, &labels)
            .unwrap_err()
            .to_string()
            .contains('x'));
    }
}
