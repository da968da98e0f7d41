//! Cross-entropy losses on score maps and their analytic gradients.
//!
//! The query loss and the support (self-regularization) loss are the same
//! pixel-averaged negative log-likelihood, evaluated on query or support
//! score maps. With several support images the support loss is the mean of
//! the per-image losses.

use serde::{Deserialize, Serialize};

use crate::data::MaskMap;
use crate::error::{Error, Result};
use crate::inference::{eval_pixel, InferenceConfig, MetricKind, PreparedPrototypes, ScoreMap};
use crate::numerics::softmax_into;
use crate::prototype::{FeatureMap, PrototypeSet, SupportSet};

/// Scores are floored here before taking the log.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub w_s: f64,
    pub w_q: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_s: 1.0, w_q: 1.0 }
    }
}

impl LossWeights {
    pub fn new(w_s: f64, w_q: f64) -> Result<Self> {
        let w = Self { w_s, w_q };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_s >= 0.0 && self.w_q >= 0.0) || !(self.w_s + self.w_q > 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative with positive sum, got ({}, {})",
                self.w_s, self.w_q
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_que: f64,
    pub l_sup: f64,
    pub total: f64,
    /// Spatial pixels per image at feature resolution.
    pub pixel_count: usize,
}

pub fn total_loss(l_sup: f64, l_que: f64, w: &LossWeights) -> f64 {
    w.w_s * l_sup + w.w_q * l_que
}

/// `-(1/N) Σ_pixels log(score at the ground-truth channel)`.
pub fn cross_entropy(scores: &ScoreMap, gt: &MaskMap) -> Result<f64> {
    if (scores.height, scores.width) != (gt.height, gt.width) {
        return Err(Error::ShapeMismatch(format!(
            "scores {}×{} vs mask {}×{}",
            scores.height, scores.width, gt.height, gt.width
        )));
    }
    let mut sum = 0.0;
    for (p, &label) in scores.pixels().zip(&gt.labels) {
        let q = *p.get(label as usize).ok_or_else(|| {
            Error::ShapeMismatch(format!(
                "label {label} outside {} score channels",
                scores.channels
            ))
        })?;
        sum -= q.max(LOG_FLOOR).ln();
    }
    Ok(sum / gt.labels.len() as f64)
}

/// Loss of one image and, optionally, gradients of `scale * loss` with
/// respect to the image's features and the prototypes.
///
/// `proto_grads` (one vector per prototype) is accumulated into, not
/// overwritten. Pixels are visited in row-major order and prototypes in
/// index order, so results are bitwise reproducible.
pub(crate) fn image_loss_grad(
    features: &FeatureMap,
    gt: &MaskMap,
    protos: &PreparedPrototypes<'_>,
    alpha: f64,
    scale: f64,
    feature_grad: Option<&mut [f64]>,
    mut proto_grads: Option<&mut [Vec<f64>]>,
) -> Result<f64> {
    if (features.height(), features.width()) != (gt.height, gt.width) {
        return Err(Error::ShapeMismatch(format!(
            "features {}×{} vs mask {}×{}",
            features.height(),
            features.width(),
            gt.height,
            gt.width
        )));
    }
    if features.channels() != protos.raw.dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have D={}, prototypes D={}",
            features.channels(),
            protos.raw.dim()
        )));
    }
    let n = protos.len();
    let d = features.channels();
    let pixels = gt.labels.len() as f64;
    let mut feature_grad = feature_grad;
    let mut scaled = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut loss = 0.0;

    for (p, (f, &label)) in features.pixels().zip(&gt.labels).enumerate() {
        let y = label as usize;
        if y >= n {
            return Err(Error::ShapeMismatch(format!(
                "label {label} outside {n} prototypes"
            )));
        }
        let ev = eval_pixel(f, protos)?;
        for (s, v) in scaled.iter_mut().zip(&ev.sims) {
            *s = alpha * v;
        }
        softmax_into(&scaled, &mut q);
        loss -= q[y].max(LOG_FLOOR).ln();

        if q[y] <= LOG_FLOOR || (feature_grad.is_none() && proto_grads.is_none()) {
            continue;
        }
        // d(loss_pixel)/d(sim_j), already carrying the outer scale.
        let coef = scale * alpha / pixels;
        let g: Vec<f64> = (0..n)
            .map(|j| coef * (q[j] - if j == y { 1.0 } else { 0.0 }))
            .collect();

        match protos.metric {
            MetricKind::SqEuclidean => {
                if let Some(fg) = feature_grad.as_deref_mut() {
                    let out = &mut fg[p * d..(p + 1) * d];
                    for (j, pj) in protos.raw.vectors().iter().enumerate() {
                        for ((o, a), b) in out.iter_mut().zip(f).zip(pj) {
                            *o -= 2.0 * g[j] * (a - b);
                        }
                    }
                }
                if let Some(pg) = proto_grads.as_deref_mut() {
                    for (j, pj) in protos.raw.vectors().iter().enumerate() {
                        for ((o, a), b) in pg[j].iter_mut().zip(f).zip(pj) {
                            *o += 2.0 * g[j] * (a - b);
                        }
                    }
                }
            }
            metric => {
                // w_j = d(loss)/d(cos_j); fidelity adds the chain factor 2·cos.
                let w: Vec<f64> = (0..n)
                    .map(|j| match metric {
                        MetricKind::Fidelity => g[j] * 2.0 * ev.cos[j],
                        _ => g[j],
                    })
                    .collect();
                if let Some(fg) = feature_grad.as_deref_mut() {
                    // d cos / d f = (p̂ - cos·f̂) / ‖f‖
                    let out = &mut fg[p * d..(p + 1) * d];
                    let inv = 1.0 / ev.norm;
                    for (j, pu) in protos.unit.iter().enumerate() {
                        let c = ev.cos[j];
                        for ((o, a), b) in out.iter_mut().zip(pu).zip(&ev.unit) {
                            *o += w[j] * (a - c * b) * inv;
                        }
                    }
                }
                if let Some(pg) = proto_grads.as_deref_mut() {
                    // d cos / d p = (f̂ - cos·p̂) / ‖p‖
                    for (j, pu) in protos.unit.iter().enumerate() {
                        let c = ev.cos[j];
                        let inv = 1.0 / protos.norms[j];
                        for ((o, a), b) in pg[j].iter_mut().zip(&ev.unit).zip(pu) {
                            *o += w[j] * (a - c * b) * inv;
                        }
                    }
                }
            }
        }
    }
    Ok(loss / pixels)
}

/// Mean cross-entropy of the support images restored by `protos`.
pub fn support_loss(
    protos: &PrototypeSet,
    support: &SupportSet,
    cfg: &InferenceConfig,
) -> Result<f64> {
    let prepared = PreparedPrototypes::new(cfg.metric, protos)?;
    let mut total = 0.0;
    for (f, m) in support.pairs() {
        total += image_loss_grad(f, m, &prepared, cfg.alpha, 1.0, None, None)?;
    }
    Ok(total / support.image_count() as f64)
}

/// Gradient of [`support_loss`] with respect to every prototype, background
/// first. Differentiates through the softmax, the amplification and, for the
/// angular metrics, the normalization of the prototype.
pub fn grad_support_loss(
    protos: &PrototypeSet,
    support: &SupportSet,
    cfg: &InferenceConfig,
) -> Result<Vec<Vec<f64>>> {
    Ok(support_loss_and_grad(protos, support, cfg)?.1)
}

pub fn support_loss_and_grad(
    protos: &PrototypeSet,
    support: &SupportSet,
    cfg: &InferenceConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let prepared = PreparedPrototypes::new(cfg.metric, protos)?;
    let mut grads = vec![vec![0.0; protos.dim()]; protos.len()];
    let images = support.image_count() as f64;
    let mut total = 0.0;
    for (f, m) in support.pairs() {
        total += image_loss_grad(
            f,
            m,
            &prepared,
            cfg.alpha,
            1.0 / images,
            None,
            Some(&mut grads),
        )?;
    }
    Ok((total / images, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::score_map;
    use crate::rng::SeededRng;

    #[test]
    fn near_certain_scores_give_near_zero_loss() {
        let gt = MaskMap::new(1, 3, vec![0, 1, 1]).unwrap();
        let hi = 1.0 - 1e-15;
        let lo = 1.0 - hi;
        let s = ScoreMap {
            height: 1,
            width: 3,
            channels: 2,
            data: vec![hi, lo, lo, hi, lo, hi],
        };
        assert!(cross_entropy(&s, &gt).unwrap() < 1e-12);
    }

    #[test]
    fn uniform_scores_give_ln2() {
        let gt = MaskMap::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        let s = ScoreMap {
            height: 2,
            width: 2,
            channels: 2,
            data: vec![0.5; 8],
        };
        assert!((cross_entropy(&s, &gt).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_pixel_loop() {
        let mut rng = SeededRng::new(4);
        let (h, w, c) = (4, 4, 2);
        let mut data = Vec::new();
        for _ in 0..h * w {
            let raw: Vec<f64> = (0..=c).map(|_| rng.uniform() + 0.01).collect();
            let z: f64 = raw.iter().sum();
            data.extend(raw.iter().map(|v| v / z));
        }
        let labels: Vec<u16> = (0..h * w).map(|_| rng.below(3) as u16).collect();
        let gt = MaskMap::new(h, w, labels.clone()).unwrap();
        let s = ScoreMap {
            height: h,
            width: w,
            channels: c + 1,
            data: data.clone(),
        };
        let mut oracle = 0.0;
        for p in 0..h * w {
            oracle += -(data[p * (c + 1) + labels[p] as usize]).ln();
        }
        oracle /= (h * w) as f64;
        assert!((cross_entropy(&s, &gt).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let gt = MaskMap::filled(2, 2, 0);
        let s = ScoreMap {
            height: 1,
            width: 4,
            channels: 2,
            data: vec![0.5; 8],
        };
        assert!(matches!(cross_entropy(&s, &gt), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn weighted_total() {
        let w = LossWeights::new(1.0, 1.0).unwrap();
        assert!((total_loss(0.3, 0.7, &w) - 1.0).abs() < 1e-15);
        assert_eq!(total_loss(0.3, 0.7, &LossWeights::new(0.0, 1.0).unwrap()), 0.7);
        assert_eq!(total_loss(0.3, 0.7, &LossWeights::new(1.0, 0.0).unwrap()), 0.3);
        assert!(LossWeights::new(0.0, 0.0).is_err());
        assert!(LossWeights::new(-1.0, 2.0).is_err());
    }

    #[test]
    fn query_and_support_paths_agree() {
        let mut rng = SeededRng::new(12);
        let (h, w, d) = (4, 4, 3);
        let f = FeatureMap::new(h, w, d, (0..h * w * d).map(|_| rng.normal()).collect()).unwrap();
        let mut labels: Vec<u16> = (0..h * w).map(|_| rng.below(2) as u16).collect();
        labels[0] = 0;
        labels[1] = 1;
        let m = MaskMap::new(h, w, labels).unwrap();
        let support = SupportSet::new(vec![vec![f.clone()]], vec![vec![m.clone()]]).unwrap();
        let protos = crate::prototype::build_prototype_set(&support).unwrap();
        for metric in MetricKind::ALL {
            let cfg = InferenceConfig { metric, alpha: 5.0 };
            let via_scores = cross_entropy(&score_map(&f, &protos, &cfg).unwrap(), &m).unwrap();
            let via_support = support_loss(&protos, &support, &cfg).unwrap();
            assert_eq!(via_scores, via_support);
        }
    }
}
