//! Episode prediction and the seeded evaluation protocol.

use crate::data::{sample_episode, DatasetManifest, EpisodeInputs, MaskMap, QueryTruth, Split};
use crate::embedder::{embed, EmbedderParams};
use crate::error::Result;
use crate::eval::{binary_iou, confusion, RunAccumulator, RunMetrics};
use crate::inference::{predict, InferenceConfig};
use crate::iqi::{fused_prediction, refine_prototypes, IqiConfig, IqiWarning};
use crate::prototype::{build_prototype_set, SupportSet};
use crate::rng::SeededRng;

use super::config::EpisodeShape;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodePrediction {
    pub query: Vec<MaskMap>,
    /// Support masks restored by the unrefined prototypes, `[class][shot]`.
    pub support: Vec<Vec<MaskMap>>,
    /// Support IoU of every prototype iterate.
    pub rhos: Vec<f64>,
    pub degenerate: bool,
    pub warnings: Vec<IqiWarning>,
}

/// Predicts the query masks of an episode. Only support masks are visible.
pub fn predict_episode(
    params: &EmbedderParams,
    inputs: &EpisodeInputs,
    cfg_inf: &InferenceConfig,
    cfg_iqi: &IqiConfig,
) -> Result<EpisodePrediction> {
    let mut features = Vec::with_capacity(inputs.support.len());
    let mut masks = Vec::with_capacity(inputs.support.len());
    for shots in &inputs.support {
        features.push(
            shots
                .iter()
                .map(|s| embed(params, &s.image))
                .collect::<Result<Vec<_>>>()?,
        );
        masks.push(shots.iter().map(|s| s.mask.clone()).collect());
    }
    let support = SupportSet::new(features, masks)?;
    let p0 = build_prototype_set(&support)?;
    let query_features = inputs
        .query_images
        .iter()
        .map(|q| embed(params, q))
        .collect::<Result<Vec<_>>>()?;

    if cfg_iqi.num_prototypes == 1 {
        let query = query_features
            .iter()
            .map(|f| predict(f, &p0, cfg_inf))
            .collect::<Result<Vec<_>>>()?;
        let restored = support
            .features()
            .iter()
            .map(|fs| fs.iter().map(|f| predict(f, &p0, cfg_inf)).collect())
            .collect::<Result<Vec<_>>>()?;
        let rho = crate::iqi::support_iou(&p0, &support, cfg_inf)?;
        return Ok(EpisodePrediction {
            query,
            support: restored,
            rhos: vec![rho],
            degenerate: false,
            warnings: Vec::new(),
        });
    }

    let trace = refine_prototypes(&p0, &support, cfg_inf, cfg_iqi)?;
    let query = query_features
        .iter()
        .map(|f| fused_prediction(f, &trace, cfg_inf))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpisodePrediction {
        query,
        support: trace.iterates[0].support_predictions.clone(),
        rhos: trace.rhos(),
        degenerate: trace.is_degenerate(),
        warnings: trace.warnings,
    })
}

/// Adds one scored episode to `acc`. Counts are keyed by global class id so
/// that a run's mean IoU averages over dataset classes.
pub fn score_episode(
    inputs: &EpisodeInputs,
    pred: &EpisodePrediction,
    truth: &QueryTruth,
    acc: &mut RunAccumulator,
) -> Result<()> {
    let way = inputs.class_ids.len();
    let to_global = |l: u16| {
        if l == 0 {
            0
        } else {
            inputs.class_ids[l as usize - 1]
        }
    };
    for (p, g) in pred.query.iter().zip(&truth.masks) {
        let conf = confusion(p, g, way)?.relabel(to_global);
        acc.add_query(&conf, binary_iou(p, g)?);
    }
    for (preds, shots) in pred.support.iter().zip(&inputs.support) {
        for (p, s) in preds.iter().zip(shots) {
            acc.add_support(&confusion(p, &s.mask, way)?.relabel(to_global));
        }
    }
    acc.episodes += 1;
    if pred.degenerate {
        acc.degenerate_fusions += 1;
    }
    Ok(())
}

/// Seed of episode `index` within the run seeded by `run_seed`.
pub fn episode_seed(run_seed: u64, index: usize) -> u64 {
    SeededRng::derive(run_seed, index as u64).next_u64()
}

/// Predicted and true query masks of one episode, kept for dumping.
#[derive(Debug, Clone)]
pub struct EpisodeMasks {
    pub episode: usize,
    pub predicted: Vec<MaskMap>,
    pub truth: Vec<MaskMap>,
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_run(
    manifest: &DatasetManifest,
    params: &EmbedderParams,
    cfg_inf: &InferenceConfig,
    cfg_iqi: &IqiConfig,
    shape: EpisodeShape,
    run_seed: u64,
    episodes: usize,
    keep_masks: bool,
) -> Result<(RunMetrics, Vec<EpisodeMasks>)> {
    let mut acc = RunAccumulator::default();
    let mut kept = Vec::new();
    for e in 0..episodes {
        let episode = sample_episode(
            manifest,
            Split::Unseen,
            shape.way,
            shape.shot,
            shape.queries,
            episode_seed(run_seed, e),
        )?;
        let (inputs, truth) = episode.split_truth();
        let pred = predict_episode(params, &inputs, cfg_inf, cfg_iqi)?;
        score_episode(&inputs, &pred, &truth, &mut acc)?;
        if keep_masks {
            kept.push(EpisodeMasks {
                episode: e,
                predicted: pred.query,
                truth: truth.masks,
            });
        }
    }
    Ok((acc.finish()?, kept))
}

/// Evaluates every run seed, one thread per run. Results come back in seed
/// order regardless of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    manifest: &DatasetManifest,
    params: &EmbedderParams,
    cfg_inf: &InferenceConfig,
    cfg_iqi: &IqiConfig,
    shape: EpisodeShape,
    seeds: &[u64],
    episodes: usize,
    keep_masks: bool,
) -> Result<Vec<(RunMetrics, Vec<EpisodeMasks>)>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || {
                    evaluate_run(
                        manifest, params, cfg_inf, cfg_iqi, shape, seed, episodes, keep_masks,
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation thread panicked"))
            .collect()
    })
}
