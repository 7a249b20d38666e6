use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::audio::LabelColumn;
use crate::svm::{Selection, DEFAULT_C_LIST};
use crate::{Error, Result};

use super::UarMode;

/// Feature branch of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Acoustic,
    Linguistic,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Acoustic => "acoustic",
            Branch::Linguistic => "linguistic",
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acoustic" => Ok(Branch::Acoustic),
            "linguistic" => Ok(Branch::Linguistic),
            other => Err(Error::config(format!(
                "unknown branch `{other}` (acoustic|linguistic)"
            ))),
        }
    }
}

/// Everything `run_experiment` needs. Loaded from a `key = value` file;
/// relative paths resolve against the file's directory.
///
/// Keys: `task`, `branch`, `index`, `checkpoint`, `transcripts`,
/// `embeddings`, `features`, `out`, `c_list`, `seed`, `class_weighting`,
/// `tolerance`, `max_iterations`, `uar_mode`, `selection`,
/// `train_plus_dev`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: LabelColumn,
    pub branch: Branch,
    /// Audio index with labels and partitions (acoustic branch).
    pub index: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Transcript corpus with labels and partitions (linguistic branch).
    pub transcripts: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Precomputed feature CSV; skips extraction when set.
    pub features: Option<PathBuf>,
    pub out: PathBuf,
    pub c_list: Vec<f64>,
    pub seed: u64,
    pub class_weighting: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub uar_mode: UarMode,
    pub selection: Selection,
    /// Refit the chosen C on train and dev together for the saved model.
    pub train_plus_dev: bool,
}

pub const CONFIG_KEYS: &[&str] = &[
    "task",
    "branch",
    "index",
    "checkpoint",
    "transcripts",
    "embeddings",
    "features",
    "out",
    "c_list",
    "seed",
    "class_weighting",
    "tolerance",
    "max_iterations",
    "uar_mode",
    "selection",
    "train_plus_dev",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: LabelColumn::Arousal,
            branch: Branch::Acoustic,
            index: None,
            checkpoint: None,
            transcripts: None,
            embeddings: None,
            features: None,
            out: PathBuf::from("out"),
            c_list: DEFAULT_C_LIST.to_vec(),
            seed: 0,
            class_weighting: true,
            tolerance: 1e-4,
            max_iterations: 10_000,
            uar_mode: UarMode::Standard,
            selection: Selection::PostVote,
            train_plus_dev: false,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!(
            "`{key}` expects a boolean, got `{v}`"
        ))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("`{key}` expects a number, got `{v}`")))
}

/// Splits `key = value` lines. `#` starts a comment.
pub fn parse_key_values(text: &str, source: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if let Some(prev) = seen.insert(k.clone(), i + 1) {
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: format!("`{k}` already set on line {prev}"),
            });
        }
        out.push((i + 1, k, v));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::default();
        for (line, k, v) in parse_key_values(&text, &path.display().to_string())? {
            cfg.set(&k, &v, base).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    /// Sets one key. Relative paths are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "task" => self.task = value.parse()?,
            "branch" => self.branch = value.parse()?,
            "index" => self.index = Some(path()),
            "checkpoint" => self.checkpoint = Some(path()),
            "transcripts" => self.transcripts = Some(path()),
            "embeddings" => self.embeddings = Some(path()),
            "features" => self.features = Some(path()),
            "out" => self.out = path(),
            "c_list" => {
                self.c_list = value
                    .split(',')
                    .map(|c| parse_num(key, c.trim()))
                    .collect::<Result<Vec<f64>>>()?
            }
            "seed" => self.seed = parse_num(key, value)?,
            "class_weighting" => self.class_weighting = parse_bool(key, value)?,
            "tolerance" => self.tolerance = parse_num(key, value)?,
            "max_iterations" => self.max_iterations = parse_num(key, value)?,
            "uar_mode" => self.uar_mode = value.parse()?,
            "selection" => self.selection = value.parse()?,
            "train_plus_dev" => self.train_plus_dev = parse_bool(key, value)?,
            other => {
                return Err(Error::config(format!(
                    "unknown key `{other}`; known keys: {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Checks value ranges and that every input the branch needs exists.
    pub fn validate(&self) -> Result<()> {
        if self.c_list.is_empty() || self.c_list.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::config("c_list must hold positive values"));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::config(
                "tolerance and max_iterations must be positive",
            ));
        }
        let need = |name: &str, p: &Option<PathBuf>| -> Result<()> {
            match p {
                None => Err(Error::config(format!(
                    "{} branch needs `{name}`",
                    self.branch.as_str()
                ))),
                Some(p) if !p.exists() => Err(Error::config(format!(
                    "`{name}` path {} does not exist",
                    p.display()
                ))),
                Some(_) => Ok(()),
            }
        };
        match self.branch {
            Branch::Acoustic => {
                need("index", &self.index)?;
                if self.features.is_none() {
                    need("checkpoint", &self.checkpoint)?;
                }
            }
            Branch::Linguistic => {
                need("transcripts", &self.transcripts)?;
                if self.features.is_none() {
                    need("embeddings", &self.embeddings)?;
                }
            }
        }
        if self.features.is_some() {
            need("features", &self.features)?;
        }
        Ok(())
    }

    /// Effective settings for echoing into reports. The output directory
    /// is left out so reports compare equal across locations.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("task", self.task.as_str().into());
        put("branch", self.branch.as_str().into());
        for (k, p) in [
            ("index", &self.index),
            ("checkpoint", &self.checkpoint),
            ("transcripts", &self.transcripts),
            ("embeddings", &self.embeddings),
            ("features", &self.features),
        ] {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        put(
            "c_list",
            self.c_list
                .iter()
                .map(|c| format!("{c:e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("seed", self.seed.to_string());
        put("class_weighting", self.class_weighting.to_string());
        put("tolerance", format!("{:e}", self.tolerance));
        put("max_iterations", self.max_iterations.to_string());
        put("uar_mode", format!("{:?}", self.uar_mode).to_lowercase());
        put(
            "selection",
            match self.selection {
                Selection::PostVote => "post_vote",
                Selection::PreVote => "pre_vote",
            }
            .into(),
        );
        put("train_plus_dev", self.train_plus_dev.to_string());
        m
    }
}
