mod common;

use protoseg::cli::pipeline::{predict_episode, score_episode};
use protoseg::data::{
    generate_synthetic_dataset, sample_episode, DatasetManifest, MaskMap, Split, SyntheticConfig,
};
use protoseg::embedder::{embed, train, EmbedderConfig, EmbedderParams, TrainConfig};
use protoseg::eval::RunAccumulator;
use protoseg::inference::InferenceConfig;
use protoseg::iqi::IqiConfig;

fn dataset() -> (tempfile::TempDir, DatasetManifest) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SyntheticConfig {
        height: 24,
        width: 24,
        images_seen: 60,
        images_unseen: 40,
        ..SyntheticConfig::default()
    };
    let m = generate_synthetic_dataset(&cfg, dir.path()).unwrap();
    (dir, m)
}

fn small_embedder() -> EmbedderConfig {
    EmbedderConfig {
        hidden: 8,
        dim: 12,
        ..EmbedderConfig::default()
    }
}

#[test]
fn query_truth_never_reaches_the_predictor() {
    let (_d, m) = dataset();
    let params = EmbedderParams::init(&small_embedder(), 1).unwrap();
    let cfg = InferenceConfig::default();
    let iqi = IqiConfig::default();
    for seed in 0..5 {
        let episode = sample_episode(&m, Split::Unseen, 2, 1, 2, seed).unwrap();
        let (inputs, truth) = episode.split_truth();
        let before = predict_episode(&params, &inputs, &cfg, &iqi).unwrap();

        // Score with tampered truth: predictions are already fixed, only
        // the metrics may change.
        let mut tampered = truth.clone();
        for m in &mut tampered.masks {
            *m = MaskMap::filled(m.height, m.width, 1);
        }
        let mut a = RunAccumulator::default();
        let mut b = RunAccumulator::default();
        score_episode(&inputs, &before, &truth, &mut a).unwrap();
        score_episode(&inputs, &before, &tampered, &mut b).unwrap();
        assert_ne!(a.query, b.query);

        // Predicting again from the same inputs gives the same masks.
        let again = predict_episode(&params, &inputs, &cfg, &iqi).unwrap();
        assert_eq!(before, again);
    }
}

#[test]
fn support_and_query_share_weights() {
    let (_d, m) = dataset();
    let params = EmbedderParams::init(&small_embedder(), 2).unwrap();
    let e = sample_episode(&m, Split::Seen, 1, 1, 1, 3).unwrap();
    let image = &e.support[0][0].image;
    assert_eq!(embed(&params, image).unwrap(), embed(&params, image).unwrap());
}

fn train_cfg(iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_iterations_return_init() {
    let (_d, m) = dataset();
    let init = EmbedderParams::init(&small_embedder(), 4).unwrap();
    let (out, log) = train(&m, init.clone(), &train_cfg(0), &InferenceConfig::default()).unwrap();
    assert_eq!(out, init);
    assert!(log.is_empty());
}

#[test]
fn fifty_iterations_are_reproducible() {
    let (_d, m) = dataset();
    let init = EmbedderParams::init(&small_embedder(), 4).unwrap();
    let cfg = InferenceConfig::default();
    let (a, la) = train(&m, init.clone(), &train_cfg(50), &cfg).unwrap();
    let (b, lb) = train(&m, init, &train_cfg(50), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
}

#[test]
fn training_reduces_loss() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic_dataset(&SyntheticConfig::default(), dir.path()).unwrap();
    let init = EmbedderParams::init(&EmbedderConfig::default(), 0).unwrap();
    let (_, log) = train(&m, init, &train_cfg(300), &InferenceConfig::default()).unwrap();
    let mean = |s: &[protoseg::embedder::TrainLogEntry]| {
        s.iter().map(|e| e.total).sum::<f64>() / s.len() as f64
    };
    let first = mean(&log[..50]);
    let last = mean(&log[250..]);
    assert!(last < first, "first 50 mean {first}, last 50 mean {last}");
}
