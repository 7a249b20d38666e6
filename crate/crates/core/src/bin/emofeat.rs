use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use emofeat::audio::DatasetIndex;
use emofeat::eval::{
    parse_key_values, predictions_csv, run_experiment, split_units, uar_with, vote_narratives,
    Branch, ConfusionMatrix, ExperimentConfig, LabelTable, PredictionRecord,
};
use emofeat::features::{read_features_csv, write_features_csv, FeatureRow};
use emofeat::samplecnn::{
    build_model, clips_from_index, extract_features, load_checkpoint, pretrain, save_checkpoint,
    Checkpoint, NarrativeFile, SampleCnnConfig, TrainConfig, TrainingRecord,
};
use emofeat::svm::{
    argmax_lowest, load_svm_model, save_svm_model, train_ovr, Standardizer, SvmConfig, SvmModel,
};
use emofeat::text::{load_token_embeddings, load_transcripts, pool_sentence, split_sentences};
use emofeat::{Error, Level, Partition, Result};

#[derive(Parser)]
#[command(
    name = "emofeat",
    version,
    about = "Emotion recognition from transfer features"
)]
struct Cli {
    /// key = value settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the CNN on a labeled audio index.
    Pretrain(PretrainArgs),
    /// Pool CNN activations for every 5 s chunk of the indexed audio.
    ExtractAudio(ExtractAudioArgs),
    /// Split transcripts into sentences and pool token embeddings.
    ExtractText(ExtractTextArgs),
    /// Fit a one-vs-rest linear SVM on the train partition.
    TrainSvm(TrainSvmArgs),
    /// Score the dev partition with a saved SVM.
    Evaluate(EvaluateArgs),
    /// Run the full C sweep and write the report.
    Report(ReportArgs),
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    index: Option<String>,
    /// Label column to learn (arousal|valence).
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    /// Comma-separated block widths; selects a reduced network.
    #[arg(long)]
    block_filters: Option<String>,
    #[arg(long)]
    initial_filters: Option<String>,
    #[arg(long)]
    input_len: Option<String>,
}

#[derive(Args)]
struct ExtractAudioArgs {
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    index: Option<String>,
}

#[derive(Args)]
struct ExtractTextArgs {
    #[arg(long)]
    transcripts: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
}

#[derive(Args)]
struct LabelArgs {
    /// Feature CSV from extract-audio or extract-text.
    #[arg(long)]
    features: Option<String>,
    /// Audio index holding labels (acoustic).
    #[arg(long)]
    index: Option<String>,
    /// Transcript corpus holding labels (linguistic).
    #[arg(long)]
    transcripts: Option<String>,
    #[arg(long)]
    task: Option<String>,
}

#[derive(Args)]
struct TrainSvmArgs {
    #[command(flatten)]
    labels: LabelArgs,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    train_plus_dev: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    labels: LabelArgs,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    branch: Option<String>,
    #[arg(long)]
    index: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    transcripts: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    train_plus_dev: bool,
}

/// Experiment keys plus the ones only pretraining and `train-svm` use.
#[derive(Debug, Clone)]
struct Settings {
    exp: ExperimentConfig,
    train: TrainConfig,
    block_filters: Option<Vec<usize>>,
    initial_filters: usize,
    input_len: usize,
    c: f64,
    model: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            exp: ExperimentConfig::default(),
            train: TrainConfig::default(),
            block_filters: None,
            initial_filters: 64,
            input_len: emofeat::audio::CHUNK_LEN,
            c: 1.0,
            model: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("`{key}` expects a number, got `{v}`")))
}

impl Settings {
    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        match key {
            "epochs" => self.train.epochs = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "learning_rate" => self.train.adam.learning_rate = num(key, value)?,
            "initial_filters" => self.initial_filters = num(key, value)?,
            "input_len" => self.input_len = num(key, value)?,
            "block_filters" => {
                self.block_filters = Some(
                    value
                        .split(',')
                        .map(|v| num(key, v.trim()))
                        .collect::<Result<Vec<usize>>>()?,
                )
            }
            "c" => self.c = num(key, value)?,
            "model" => self.model = Some(base.join(value)),
            _ => self.exp.set(key, value, base)?,
        }
        Ok(())
    }

    fn load(cli: &Cli, overrides: &[(&str, &Option<String>)]) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = &cli.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let base = path.parent().unwrap_or(Path::new("."));
            for (line, k, v) in parse_key_values(&text, &path.display().to_string())? {
                s.set(&k, &v, base).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line,
                    message: e.to_string(),
                })?;
            }
        }
        let here = Path::new(".");
        for (k, v) in overrides {
            if let Some(v) = v {
                s.set(k, v, here)?;
            }
        }
        if let Some(seed) = cli.seed {
            s.exp.seed = seed;
            s.train.seed = seed;
        } else {
            s.train.seed = s.exp.seed;
        }
        s.train.augment.seed = s.train.seed;
        if let Some(out) = &cli.out {
            s.exp.out = out.clone();
        }
        Ok(s)
    }

    fn svm(&self, c: f64) -> SvmConfig {
        SvmConfig {
            c,
            tolerance: self.exp.tolerance,
            max_iterations: self.exp.max_iterations,
            seed: self.exp.seed,
            class_weighting: self.exp.class_weighting,
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| {
        Error::config(format!(
            "missing `{key}` (flag --{} or config key)",
            key.replace('_', "-")
        ))
    })
}

fn out_dir(s: &Settings) -> Result<&Path> {
    std::fs::create_dir_all(&s.exp.out).map_err(|e| Error::io(&s.exp.out, e))?;
    Ok(&s.exp.out)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .map_err(|e| Error::io(path, e))
}

fn cmd_pretrain(s: &Settings) -> Result<()> {
    let index = DatasetIndex::load(required(&s.exp.index, "index")?)?;
    index.check_speaker_disjoint()?;
    let present: std::collections::BTreeSet<Level> = index
        .partition(Partition::Train)
        .iter()
        .map(|e| e.label(s.exp.task))
        .collect();
    let (train, dev, classes) = clips_from_index(&index, s.exp.task, present.len())?;
    let mut cfg = match &s.block_filters {
        Some(blocks) => SampleCnnConfig::reduced(s.initial_filters, blocks.clone(), s.input_len),
        None => SampleCnnConfig {
            input_len: s.input_len,
            ..SampleCnnConfig::default()
        },
    };
    cfg.num_classes = classes.len();
    let mut model = build_model::<f32>(&cfg, s.train.seed)?;
    info!(
        "pretraining {} parameters on {} clips ({} dev), classes {:?}",
        model.param_count(),
        train.len(),
        dev.len(),
        classes
    );
    let metrics = pretrain(&mut model, &train, &dev, &s.train)?;
    let out = out_dir(s)?;
    let mut ckpt = Checkpoint::new(model);
    ckpt.training = Some(TrainingRecord {
        config: s.train.clone(),
        metrics: metrics.clone(),
    });
    save_checkpoint(&ckpt, out.join("checkpoint.ckpt"))?;
    write_json(&out.join("metrics.json"), &metrics)?;
    for m in &metrics.epochs {
        println!(
            "epoch {:>3}  loss {:.4}  train acc {:.3}  dev acc {}",
            m.epoch,
            m.train_loss,
            m.train_accuracy,
            m.val_accuracy
                .map_or("-".to_string(), |a| format!("{a:.3}"))
        );
    }
    Ok(())
}

fn cmd_extract_audio(s: &Settings) -> Result<()> {
    let ckpt = load_checkpoint(required(&s.exp.checkpoint, "checkpoint")?)?;
    let index = DatasetIndex::load(required(&s.exp.index, "index")?)?;
    let files: Vec<NarrativeFile> = index
        .entries
        .iter()
        .map(|e| NarrativeFile {
            narrative_id: e.narrative_id.clone(),
            path: e.path.clone(),
        })
        .collect();
    let report = extract_features(&ckpt.model, &files);
    for (path, err) in &report.failures {
        warn!("skipped {}: {err}", path.display());
    }
    let path = out_dir(s)?.join("audio_features.csv");
    write_features_csv(&path, &report.rows)?;
    println!(
        "{} chunks from {} files -> {}",
        report.rows.len(),
        files.len() - report.failures.len(),
        path.display()
    );
    Ok(())
}

fn cmd_extract_text(s: &Settings) -> Result<()> {
    let narratives = load_transcripts(required(&s.exp.transcripts, "transcripts")?)?;
    let out = out_dir(s)?;
    let mut tsv = String::from("narrative_id\tsentence_index\tsentence\n");
    let mut counts = BTreeMap::new();
    for n in &narratives {
        let sentences = split_sentences(&n.text);
        counts.insert(n.narrative_id.clone(), sentences.len());
        for (i, sent) in sentences.iter().enumerate() {
            tsv.push_str(&format!(
                "{}\t{i}\t{}\n",
                n.narrative_id,
                sent.replace(['\t', '\n'], " ")
            ));
        }
    }
    let sentences_path = out.join("sentences.tsv");
    std::fs::write(&sentences_path, tsv).map_err(|e| Error::io(&sentences_path, e))?;
    println!(
        "{} narratives -> {}",
        narratives.len(),
        sentences_path.display()
    );

    if let Some(path) = &s.exp.embeddings {
        let seqs = load_token_embeddings(path)?;
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut rows = Vec::with_capacity(seqs.len());
        for seq in &seqs {
            *seen.entry(&seq.narrative_id).or_default() += 1;
            let f = pool_sentence(seq)?;
            rows.push(FeatureRow {
                narrative_id: f.narrative_id,
                unit_index: f.sentence_index,
                vector: f.vector,
            });
        }
        for (id, n) in &seen {
            match counts.get(*id) {
                Some(m) if m != n => {
                    warn!("`{id}`: {n} embedded sentences but the splitter found {m}")
                }
                None => warn!("`{id}` has embeddings but no transcript"),
                _ => {}
            }
        }
        let features_path = out.join("text_features.csv");
        write_features_csv(&features_path, &rows)?;
        println!("{} sentences -> {}", rows.len(), features_path.display());
    }
    Ok(())
}

fn label_overrides(a: &LabelArgs) -> Vec<(&'static str, &Option<String>)> {
    vec![
        ("features", &a.features),
        ("index", &a.index),
        ("transcripts", &a.transcripts),
        ("task", &a.task),
    ]
}

fn labels(s: &Settings) -> Result<LabelTable> {
    let mut cfg = s.exp.clone();
    if cfg.index.is_none() && cfg.transcripts.is_some() {
        cfg.branch = Branch::Linguistic;
    }
    LabelTable::for_config(&cfg)
}

fn cmd_train_svm(s: &Settings, train_plus_dev: bool) -> Result<()> {
    let rows = read_features_csv(required(&s.exp.features, "features")?)?;
    let (train, dev) = split_units(rows, &labels(s)?)?;
    let units: Vec<_> = if train_plus_dev || s.exp.train_plus_dev {
        train.iter().chain(&dev).collect()
    } else {
        train.iter().collect()
    };
    let x: Vec<Vec<f64>> = units.iter().map(|u| u.features.clone()).collect();
    let y: Vec<usize> = units.iter().map(|u| u.label).collect();
    let st = Standardizer::fit(&x)?;
    let linear = train_ovr(&st.apply_rows(&x)?, &y, Level::ALL.len(), &s.svm(s.c))?;
    let classes = Level::ALL.iter().map(|l| l.as_str().to_string()).collect();
    let model = SvmModel::new(classes, s.c, s.exp.class_weighting, st, linear);
    let path = out_dir(s)?.join("svm_model.json");
    save_svm_model(&model, &path)?;
    println!("trained on {} units -> {}", units.len(), path.display());
    Ok(())
}

fn cmd_evaluate(s: &Settings) -> Result<()> {
    let model = load_svm_model(required(&s.model, "model")?)?;
    let rows = read_features_csv(required(&s.exp.features, "features")?)?;
    let (_, dev) = split_units(rows, &labels(s)?)?;
    if dev.is_empty() {
        return Err(Error::data("no dev units to evaluate"));
    }
    let k = model.classes.len();
    let records = dev
        .iter()
        .map(|u| {
            let scores = model.decision(&u.features)?;
            Ok(PredictionRecord {
                narrative_id: u.narrative_id.clone(),
                unit_index: u.unit_index,
                predicted: argmax_lowest(&scores),
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let truths: BTreeMap<String, usize> = dev
        .iter()
        .map(|u| (u.narrative_id.clone(), u.label))
        .collect();
    let voted = vote_narratives(&records)?;
    let cm = ConfusionMatrix::from_predictions(&voted, &truths, k)?;
    let unit_cm = ConfusionMatrix::from_pairs(
        dev.iter()
            .zip(&records)
            .map(|(u, r)| (u.label, r.predicted)),
        k,
    );
    let uar = uar_with(&cm, s.exp.uar_mode)?;
    let pre = uar_with(&unit_cm, s.exp.uar_mode)?;
    let out = out_dir(s)?;
    let path = out.join("dev_predictions.csv");
    std::fs::write(&path, predictions_csv(&records, &model.classes))
        .map_err(|e| Error::io(&path, e))?;
    write_json(
        &out.join("evaluation.json"),
        &serde_json::json!({ "c": model.c, "uar_dev": uar, "uar_dev_prevote": pre, "confusion": cm }),
    )?;
    println!(
        "UAR dev {:.1}%  (pre-vote {:.1}%) over {} narratives",
        100.0 * uar,
        100.0 * pre,
        cm.total()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Pretrain(a) => {
            let s = Settings::load(
                &cli,
                &[
                    ("index", &a.index),
                    ("task", &a.task),
                    ("epochs", &a.epochs),
                    ("batch_size", &a.batch_size),
                    ("learning_rate", &a.learning_rate),
                    ("block_filters", &a.block_filters),
                    ("initial_filters", &a.initial_filters),
                    ("input_len", &a.input_len),
                ],
            )?;
            cmd_pretrain(&s)
        }
        Command::ExtractAudio(a) => {
            let s = Settings::load(&cli, &[("checkpoint", &a.checkpoint), ("index", &a.index)])?;
            cmd_extract_audio(&s)
        }
        Command::ExtractText(a) => {
            let s = Settings::load(
                &cli,
                &[
                    ("transcripts", &a.transcripts),
                    ("embeddings", &a.embeddings),
                ],
            )?;
            cmd_extract_text(&s)
        }
        Command::TrainSvm(a) => {
            let mut o = label_overrides(&a.labels);
            o.push(("c", &a.c));
            let s = Settings::load(&cli, &o)?;
            cmd_train_svm(&s, a.train_plus_dev)
        }
        Command::Evaluate(a) => {
            let mut o = label_overrides(&a.labels);
            o.push(("model", &a.model));
            let s = Settings::load(&cli, &o)?;
            cmd_evaluate(&s)
        }
        Command::Report(a) => {
            let mut s = Settings::load(
                &cli,
                &[
                    ("task", &a.task),
                    ("branch", &a.branch),
                    ("index", &a.index),
                    ("checkpoint", &a.checkpoint),
                    ("transcripts", &a.transcripts),
                    ("embeddings", &a.embeddings),
                    ("features", &a.features),
                ],
            )?;
            s.exp.train_plus_dev |= a.train_plus_dev;
            let outcome = run_experiment(&s.exp)?;
            print!("{}", outcome.report.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
