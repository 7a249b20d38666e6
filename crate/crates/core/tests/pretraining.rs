use emofeat::audio::{DatasetIndex, LabelColumn};
use emofeat::samplecnn::{
    build_model, clips_from_index, load_checkpoint, pretrain, save_checkpoint, Checkpoint,
    MetricsLog, SampleCnnConfig, TrainConfig,
};
use emofeat::synthetic::write_pitch_corpus;

fn run(dir: &std::path::Path, seed: u64) -> (MetricsLog, Checkpoint) {
    let index = DatasetIndex::load(write_pitch_corpus(dir, 96, 32, 729, 1).unwrap()).unwrap();
    let (train, dev, _) = clips_from_index(&index, LabelColumn::Arousal, 2).unwrap();
    let mut model =
        build_model::<f32>(&SampleCnnConfig::reduced(8, vec![8, 16], 729), seed).unwrap();
    let tc = TrainConfig {
        epochs: 3,
        batch_size: 16,
        seed,
        ..Default::default()
    };
    let log = pretrain(&mut model, &train, &dev, &tc).unwrap();
    (log, Checkpoint::new(model))
}

#[test]
fn fixed_seed_reproduces_training() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ca) = run(dir.path(), 7);
    let (b, cb) = run(dir.path(), 7);
    assert_eq!(a, b);
    assert_eq!(ca, cb);
    let (c, _) = run(dir.path(), 8);
    assert_ne!(a, c);
}

#[test]
fn training_lowers_loss_and_survives_reload() {
    let dir = tempfile::tempdir().unwrap();
    let (log, ckpt) = run(dir.path(), 3);
    let losses: Vec<f64> = log.epochs.iter().map(|m| m.train_loss).collect();
    assert!(losses.iter().all(|l| l.is_finite()));
    assert!(losses[2] < losses[0], "{losses:?}");
    let path = dir.path().join("trained.ckpt");
    save_checkpoint(&ckpt, &path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), ckpt);
}
