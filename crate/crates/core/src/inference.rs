//! Similarity metrics, per-pixel score maps and hard mask prediction.
//!
//! All three metrics are expressed as similarities (larger means closer):
//!
//! - fidelity: `(f̂ · p̂)²` on unit-normalized vectors, the quadratic form of
//!   `f̂` under the prototype's density matrix `p̂ᵀp̂`; always in `[0, 1]`,
//! - cosine: `f̂ · p̂`,
//! - squared Euclidean: `-‖f - p‖²`.
//!
//! The score of class `j` at a pixel is `softmax_j(α · sim(f, p_j))`. The same
//! code path scores query and support features.

use serde::{Deserialize, Serialize};

use crate::data::MaskMap;
use crate::error::{Error, Result};
use crate::numerics::{argmax, dot, normalize_slice, softmax_into};
use crate::prototype::{FeatureMap, PrototypeSet};

pub const DEFAULT_ALPHA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Fidelity,
    Cosine,
    SqEuclidean,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [
        MetricKind::Fidelity,
        MetricKind::Cosine,
        MetricKind::SqEuclidean,
    ];

    pub fn needs_normalization(self) -> bool {
        !matches!(self, MetricKind::SqEuclidean)
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricKind::Fidelity => "fidelity",
            MetricKind::Cosine => "cosine",
            MetricKind::SqEuclidean => "sq_euclidean",
        })
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fidelity" => Ok(MetricKind::Fidelity),
            "cosine" => Ok(MetricKind::Cosine),
            "sq_euclidean" => Ok(MetricKind::SqEuclidean),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub metric: MetricKind,
    /// Amplification factor applied to similarities before the softmax.
    pub alpha: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            metric: MetricKind::Fidelity,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl InferenceConfig {
    pub fn new(metric: MetricKind, alpha: f64) -> Result<Self> {
        let cfg = Self { metric, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Similarity of feature vector `f` to prototype `p`.
///
/// The fidelity branch evaluates `f̂ (p̂ᵀ p̂) f̂ᵀ` with the explicit D×D density
/// matrix. Score maps use the equivalent `(f̂ · p̂)²`.
pub fn similarity(metric: MetricKind, f: &[f64], p: &[f64]) -> Result<f64> {
    if f.len() != p.len() {
        return Err(Error::ShapeMismatch(format!(
            "similarity of length {} and {}",
            f.len(),
            p.len()
        )));
    }
    match metric {
        MetricKind::Fidelity => {
            let (fu, _) = normalize_slice(f)?;
            let (pu, _) = normalize_slice(p)?;
            let d = pu.len();
            let mut total = 0.0;
            for a in 0..d {
                let mut row = 0.0;
                for b in 0..d {
                    row += pu[a] * pu[b] * fu[b];
                }
                total += fu[a] * row;
            }
            Ok(total)
        }
        MetricKind::Cosine => {
            let (fu, _) = normalize_slice(f)?;
            let (pu, _) = normalize_slice(p)?;
            Ok(dot(&fu, &pu))
        }
        MetricKind::SqEuclidean => Ok(-f
            .iter()
            .zip(p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()),
    }
}

/// Prototypes with their unit directions and norms precomputed.
#[derive(Debug, Clone)]
pub(crate) struct PreparedPrototypes<'a> {
    pub metric: MetricKind,
    pub raw: &'a PrototypeSet,
    pub unit: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
}

impl<'a> PreparedPrototypes<'a> {
    pub fn new(metric: MetricKind, protos: &'a PrototypeSet) -> Result<Self> {
        let (unit, norms) = if metric.needs_normalization() {
            protos
                .vectors()
                .iter()
                .map(|p| normalize_slice(p))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip()
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            metric,
            raw: protos,
            unit,
            norms,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }
}

/// Per-pixel intermediate values shared by scoring and differentiation.
#[derive(Debug, Clone)]
pub(crate) struct PixelEval {
    /// Unit feature (empty for squared Euclidean).
    pub unit: Vec<f64>,
    pub norm: f64,
    /// `f̂ · p̂_j` for the normalized metrics, unused otherwise.
    pub cos: Vec<f64>,
    pub sims: Vec<f64>,
}

pub(crate) fn eval_pixel(f: &[f64], protos: &PreparedPrototypes<'_>) -> Result<PixelEval> {
    let n = protos.len();
    match protos.metric {
        MetricKind::SqEuclidean => {
            let sims = protos
                .raw
                .vectors()
                .iter()
                .map(|p| -f.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .collect();
            Ok(PixelEval {
                unit: Vec::new(),
                norm: 0.0,
                cos: Vec::new(),
                sims,
            })
        }
        metric => {
            let (unit, norm) = normalize_slice(f)?;
            let cos: Vec<f64> = protos.unit.iter().map(|p| dot(&unit, p)).collect();
            let sims = if metric == MetricKind::Fidelity {
                cos.iter().map(|c| c * c).collect()
            } else {
                cos.clone()
            };
            debug_assert_eq!(cos.len(), n);
            Ok(PixelEval {
                unit,
                norm,
                cos,
                sims,
            })
        }
    }
}

/// H×W×(C+1) class probabilities; channel 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ScoreMap {
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn class_count(&self) -> usize {
        self.channels - 1
    }
}

fn check_dims(features: &FeatureMap, protos: &PrototypeSet) -> Result<()> {
    if features.channels() != protos.dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have D={}, prototypes D={}",
            features.channels(),
            protos.dim()
        )));
    }
    Ok(())
}

/// Raw similarity of every pixel to every prototype, H×W×(C+1).
pub fn similarity_map(
    features: &FeatureMap,
    protos: &PrototypeSet,
    metric: MetricKind,
) -> Result<Vec<f64>> {
    check_dims(features, protos)?;
    let prepared = PreparedPrototypes::new(metric, protos)?;
    let mut out = Vec::with_capacity(features.pixel_count() * protos.len());
    for f in features.pixels() {
        out.extend(eval_pixel(f, &prepared)?.sims);
    }
    Ok(out)
}

/// Softmax of `alpha * sims` per pixel.
pub fn scores_from_similarities(
    height: usize,
    width: usize,
    channels: usize,
    sims: &[f64],
    alpha: f64,
) -> ScoreMap {
    let mut data = vec![0.0; sims.len()];
    let mut scaled = vec![0.0; channels];
    for (row, out) in sims.chunks(channels).zip(data.chunks_mut(channels)) {
        for (s, &v) in scaled.iter_mut().zip(row) {
            *s = alpha * v;
        }
        softmax_into(&scaled, out);
    }
    ScoreMap {
        height,
        width,
        channels,
        data,
    }
}

pub fn score_map(
    features: &FeatureMap,
    protos: &PrototypeSet,
    cfg: &InferenceConfig,
) -> Result<ScoreMap> {
    let sims = similarity_map(features, protos, cfg.metric)?;
    Ok(scores_from_similarities(
        features.height(),
        features.width(),
        protos.len(),
        &sims,
        cfg.alpha,
    ))
}

/// Per-pixel argmax over channels; ties go to the lowest channel.
pub fn predict_mask(scores: &ScoreMap) -> MaskMap {
    MaskMap {
        height: scores.height,
        width: scores.width,
        labels: scores.pixels().map(|p| argmax(p) as u16).collect(),
    }
}

/// `predict_mask(score_map(..))`.
pub fn predict(
    features: &FeatureMap,
    protos: &PrototypeSet,
    cfg: &InferenceConfig,
) -> Result<MaskMap> {
    Ok(predict_mask(&score_map(features, protos, cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn protos(v: Vec<Vec<f64>>) -> PrototypeSet {
        PrototypeSet::from_vectors(v).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let v = [0.3, -1.2, 2.0];
        assert!((similarity(MetricKind::Fidelity, &v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            similarity(MetricKind::Fidelity, &[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            0.0
        );
        let fid = similarity(MetricKind::Fidelity, &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        let cos = similarity(MetricKind::Cosine, &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((fid - 0.5).abs() < 1e-15);
        assert!((cos * cos - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_vectors_are_errors_for_angular_metrics() {
        for m in [MetricKind::Fidelity, MetricKind::Cosine] {
            assert!(matches!(
                similarity(m, &[0.0, 0.0], &[1.0, 0.0]),
                Err(Error::ZeroVector { .. })
            ));
            assert!(matches!(
                similarity(m, &[1.0, 0.0], &[0.0, 0.0]),
                Err(Error::ZeroVector { .. })
            ));
        }
        assert_eq!(
            similarity(MetricKind::SqEuclidean, &[0.0, 0.0], &[1.0, 2.0]).unwrap(),
            -5.0
        );
    }

    #[test]
    fn identical_prototypes_split_evenly() {
        let f = FeatureMap::new(2, 2, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 3.0, 0.1, 0.0]).unwrap();
        let p = protos(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        for metric in MetricKind::ALL {
            let s = score_map(&f, &p, &InferenceConfig { metric, alpha: 10.0 }).unwrap();
            assert!(s.data.iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn single_pixel_closed_form() {
        let f = FeatureMap::new(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let p = protos(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let s = score_map(&f, &p, &InferenceConfig::new(MetricKind::Fidelity, 1.0).unwrap())
            .unwrap();
        let e = std::f64::consts::E;
        assert!((s.data[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((s.data[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((s.data[0] - 0.2689).abs() < 5e-5);
        assert!((s.data[1] - 0.7311).abs() < 5e-5);
    }

    #[test]
    fn score_map_matches_pixel_loop_oracle() {
        let mut rng = SeededRng::new(21);
        let (h, w, d, c) = (5, 5, 4, 2);
        let data: Vec<f64> = (0..h * w * d).map(|_| rng.normal()).collect();
        let f = FeatureMap::new(h, w, d, data.clone()).unwrap();
        let pv: Vec<Vec<f64>> = (0..=c).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let p = protos(pv.clone());
        for metric in MetricKind::ALL {
            let alpha = 3.5;
            let s = score_map(&f, &p, &InferenceConfig { metric, alpha }).unwrap();
            for px in 0..h * w {
                let fv = &data[px * d..(px + 1) * d];
                let e: Vec<f64> = pv
                    .iter()
                    .map(|pj| (alpha * similarity(metric, fv, pj).unwrap()).exp())
                    .collect();
                let z: f64 = e.iter().sum();
                for j in 0..=c {
                    assert!((s.pixel(px)[j] - e[j] / z).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn predict_examples() {
        let s = ScoreMap {
            height: 1,
            width: 3,
            channels: 2,
            data: vec![0.9, 0.1, 0.9, 0.1, 0.9, 0.1],
        };
        assert_eq!(predict_mask(&s).labels, vec![0, 0, 0]);
        let s = ScoreMap {
            height: 1,
            width: 2,
            channels: 3,
            data: vec![1.0 / 3.0; 6],
        };
        assert_eq!(predict_mask(&s).labels, vec![0, 0]);
    }

    #[test]
    fn separable_features_predict_ground_truth() {
        let gt = MaskMap::new(3, 3, vec![0, 1, 1, 2, 0, 1, 2, 2, 0]).unwrap();
        let d = 3;
        let mut data = vec![0.0; 9 * d];
        for (p, &l) in gt.labels.iter().enumerate() {
            data[p * d + l as usize] = 1.0;
        }
        let f = FeatureMap::new(3, 3, d, data).unwrap();
        let p = protos(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        for metric in MetricKind::ALL {
            let pred = predict(&f, &p, &InferenceConfig { metric, alpha: 10.0 }).unwrap();
            assert_eq!(pred, gt);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let f = FeatureMap::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let p = protos(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            score_map(&f, &p, &InferenceConfig::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |v| {
            v.iter().map(|x| x * x).sum::<f64>() > 1e-6
        })
    }

    proptest! {
        #[test]
        fn fidelity_is_squared_cosine(
            (f, p) in (2usize..64).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d))),
        ) {
            let fid = similarity(MetricKind::Fidelity, &f, &p).unwrap();
            let cos = similarity(MetricKind::Cosine, &f, &p).unwrap();
            prop_assert!((fid - cos * cos).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fid));
        }

        #[test]
        fn angular_metrics_ignore_scale(
            (f, p) in (2usize..16).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d))),
            a in 0.01f64..100.0, b in 0.01f64..100.0,
        ) {
            let fs: Vec<f64> = f.iter().map(|x| a * x).collect();
            let ps: Vec<f64> = p.iter().map(|x| b * x).collect();
            for m in [MetricKind::Fidelity, MetricKind::Cosine] {
                let base = similarity(m, &f, &p).unwrap();
                prop_assert!((similarity(m, &fs, &ps).unwrap() - base).abs() < 1e-12);
            }
        }

        #[test]
        fn argmax_is_stable_in_alpha(seed in any::<u64>(), alpha in 0.01f64..200.0) {
            let mut rng = SeededRng::new(seed);
            let (h, w, c) = (3, 3, 3);
            let sims: Vec<f64> = (0..h * w * (c + 1)).map(|_| rng.uniform()).collect();
            let reference = scores_from_similarities(h, w, c + 1, &sims, 1.0);
            let scaled = scores_from_similarities(h, w, c + 1, &sims, alpha);
            prop_assert_eq!(predict_mask(&reference), predict_mask(&scaled));
            let direct: Vec<u16> = sims.chunks(c + 1).map(|r| argmax(r) as u16).collect();
            prop_assert_eq!(predict_mask(&scaled).labels, direct);
        }
    }

    #[test]
    fn sq_euclidean_depends_on_scale() {
        let f = [1.0, 2.0];
        let p = [2.0, 1.0];
        let base = similarity(MetricKind::SqEuclidean, &f, &p).unwrap();
        let scaled = similarity(MetricKind::SqEuclidean, &[2.0, 4.0], &p).unwrap();
        assert!((base - scaled).abs() > 1e-3);
    }
}
