//! Iterative query inference.
//!
//! Starting from the pooled prototypes, each iterate takes one gradient step
//! on the support loss. Every iterate (the unrefined one included) scores the
//! query, and the query score maps are fused with weights equal to each
//! iterate's support IoU.

use serde::{Deserialize, Serialize};

use crate::data::MaskMap;
use crate::error::{Error, Result};
use crate::eval::{confusion, mean_iou, Confusion};
use crate::inference::{predict, score_map, InferenceConfig};
use crate::loss::support_loss_and_grad;
use crate::numerics::argmax;
use crate::prototype::{FeatureMap, PrototypeSet, SupportSet};

pub const DEFAULT_ETA: f64 = 0.05;
pub const DEFAULT_NUM_PROTOTYPES: usize = 5;

/// Support loss growth between consecutive iterates that is flagged.
pub const DIVERGENCE_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IqiConfig {
    /// Step size of the prototype update.
    pub eta: f64,
    /// Number of collected prototype sets, the unrefined one included.
    pub num_prototypes: usize,
}

impl Default for IqiConfig {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            num_prototypes: DEFAULT_NUM_PROTOTYPES,
        }
    }
}

impl IqiConfig {
    pub fn new(eta: f64, num_prototypes: usize) -> Result<Self> {
        let c = Self {
            eta,
            num_prototypes,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.num_prototypes == 0 {
            return Err(Error::Config("num_prototypes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqiIterate {
    pub protos: PrototypeSet,
    /// Restored support masks, `[class][shot]`.
    pub support_predictions: Vec<Vec<MaskMap>>,
    /// Support IoU of this iterate, the fusion weight.
    pub rho: f64,
    pub support_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IqiWarning {
    /// Support loss grew by more than [`DIVERGENCE_RATIO`] going into `iterate`.
    Divergence {
        iterate: usize,
        previous: f64,
        current: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqiTrace {
    pub iterates: Vec<IqiIterate>,
    pub warnings: Vec<IqiWarning>,
}

impl IqiTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.iterates.iter().map(|it| it.rho).collect()
    }

    /// Several iterates but every fusion weight is zero.
    pub fn is_degenerate(&self) -> bool {
        self.iterates.len() > 1 && self.iterates.iter().all(|it| it.rho == 0.0)
    }
}

fn restore_support(
    protos: &PrototypeSet,
    support: &SupportSet,
    cfg: &InferenceConfig,
) -> Result<(Vec<Vec<MaskMap>>, Confusion)> {
    let mut conf = Confusion::default();
    let mut preds = Vec::with_capacity(support.class_count());
    for (fs, ms) in support.features().iter().zip(support.masks()) {
        let mut group = Vec::with_capacity(fs.len());
        for (f, m) in fs.iter().zip(ms) {
            let pred = predict(f, protos, cfg)?;
            conf.merge(&confusion(&pred, m, protos.class_count())?);
            group.push(pred);
        }
        preds.push(group);
    }
    Ok((preds, conf))
}

fn iou_or_one(conf: &Confusion) -> Result<f64> {
    match mean_iou(conf) {
        Err(Error::NoForeground) => Ok(1.0),
        other => other,
    }
}

/// Foreground mean IoU of the masks `protos` restore on the support set,
/// with counts pooled over all support images.
pub fn support_iou(
    protos: &PrototypeSet,
    support: &SupportSet,
    cfg: &InferenceConfig,
) -> Result<f64> {
    iou_or_one(&restore_support(protos, support, cfg)?.1)
}

pub fn refine_prototypes(
    p0: &PrototypeSet,
    support: &SupportSet,
    cfg_inf: &InferenceConfig,
    cfg_iqi: &IqiConfig,
) -> Result<IqiTrace> {
    cfg_iqi.validate()?;
    let mut iterates: Vec<IqiIterate> = Vec::with_capacity(cfg_iqi.num_prototypes);
    let mut warnings = Vec::new();
    let mut current = p0.clone();
    for n in 0..cfg_iqi.num_prototypes {
        let (loss, grads) = support_loss_and_grad(&current, support, cfg_inf)?;
        if let Some(prev) = iterates.last() {
            if loss > DIVERGENCE_RATIO * prev.support_loss {
                warnings.push(IqiWarning::Divergence {
                    iterate: n + 1,
                    previous: prev.support_loss,
                    current: loss,
                });
            }
        }
        let (support_predictions, conf) = restore_support(&current, support, cfg_inf)?;
        let next = if n + 1 < cfg_iqi.num_prototypes {
            let mut v = current.vectors().to_vec();
            for (p, g) in v.iter_mut().zip(&grads) {
                for (x, dx) in p.iter_mut().zip(g) {
                    *x -= cfg_iqi.eta * dx;
                }
            }
            Some(PrototypeSet::from_vectors(v)?)
        } else {
            None
        };
        iterates.push(IqiIterate {
            protos: current,
            support_predictions,
            rho: iou_or_one(&conf)?,
            support_loss: loss,
        });
        match next {
            Some(p) => current = p,
            None => break,
        }
    }
    Ok(IqiTrace { iterates, warnings })
}

/// IoU-weighted fusion of the per-iterate query score maps.
///
/// A single-iterate trace is exactly base inference with its prototypes. With
/// several iterates the weights are normalized to sum to one; if all weights
/// are zero every pixel ties and the result is all background.
pub fn fused_prediction(
    query_features: &FeatureMap,
    trace: &IqiTrace,
    cfg_inf: &InferenceConfig,
) -> Result<MaskMap> {
    let first = trace
        .iterates
        .first()
        .ok_or_else(|| Error::Config("fusion of an empty trace".into()))?;
    if trace.len() == 1 {
        return predict(query_features, &first.protos, cfg_inf);
    }
    let total: f64 = trace.iterates.iter().map(|it| it.rho).sum();
    let (h, w) = (query_features.height(), query_features.width());
    if total <= 0.0 {
        return Ok(MaskMap::filled(h, w, crate::data::BACKGROUND));
    }
    let channels = first.protos.len();
    let mut fused = vec![0.0; h * w * channels];
    for it in &trace.iterates {
        let weight = it.rho / total;
        if weight == 0.0 {
            continue;
        }
        let scores = score_map(query_features, &it.protos, cfg_inf)?;
        for (acc, s) in fused.iter_mut().zip(&scores.data) {
            *acc += weight * s;
        }
    }
    let labels = fused.chunks(channels).map(|p| argmax(p) as u16).collect();
    MaskMap::new(h, w, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::MetricKind;
    use crate::prototype::build_prototype_set;
    use crate::rng::SeededRng;

    fn random_support(rng: &mut SeededRng, h: usize, w: usize, d: usize) -> SupportSet {
        let f = FeatureMap::new(h, w, d, (0..h * w * d).map(|_| rng.normal()).collect()).unwrap();
        let mut labels: Vec<u16> = (0..h * w).map(|_| rng.below(2) as u16).collect();
        labels[0] = 0;
        labels[1] = 1;
        SupportSet::new(vec![vec![f]], vec![vec![MaskMap::new(h, w, labels).unwrap()]]).unwrap()
    }

    fn separable(d: usize) -> (SupportSet, FeatureMap, MaskMap) {
        let gt = MaskMap::new(3, 3, vec![0, 1, 1, 0, 1, 0, 0, 0, 1]).unwrap();
        let mut data = vec![0.0; 9 * d];
        for (p, &l) in gt.labels.iter().enumerate() {
            data[p * d + l as usize] = 1.0;
        }
        let f = FeatureMap::new(3, 3, d, data).unwrap();
        let s = SupportSet::new(vec![vec![f.clone()]], vec![vec![gt.clone()]]).unwrap();
        (s, f, gt)
    }

    #[test]
    fn hand_counted_support_iou() {
        let pred = MaskMap::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let gt = MaskMap::new(2, 2, vec![1, 0, 1, 0]).unwrap();
        let c = confusion(&pred, &gt, 1).unwrap();
        assert!((iou_or_one(&c).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_restoration_and_all_background() {
        let (s, _, _) = separable(2);
        let cfg = InferenceConfig::default();
        let p = build_prototype_set(&s).unwrap();
        assert_eq!(support_iou(&p, &s, &cfg).unwrap(), 1.0);
        // Swapped prototypes get every pixel wrong.
        let swapped = PrototypeSet::from_vectors(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(support_iou(&swapped, &s, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn single_iterate_is_base_inference() {
        let mut rng = SeededRng::new(30);
        let s = random_support(&mut rng, 5, 5, 4);
        let q = FeatureMap::new(5, 5, 4, (0..100).map(|_| rng.normal()).collect()).unwrap();
        let p0 = build_prototype_set(&s).unwrap();
        let cfg = InferenceConfig::default();
        let trace = refine_prototypes(&p0, &s, &cfg, &IqiConfig::new(0.7, 1).unwrap()).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.iterates[0].protos, p0);
        assert_eq!(
            fused_prediction(&q, &trace, &cfg).unwrap(),
            predict(&q, &p0, &cfg).unwrap()
        );
    }

    #[test]
    fn zero_gradient_keeps_prototypes() {
        let (s, _, _) = separable(2);
        let p0 = build_prototype_set(&s).unwrap();
        let cfg = InferenceConfig::new(MetricKind::Fidelity, 10.0).unwrap();
        let trace = refine_prototypes(&p0, &s, &cfg, &IqiConfig::new(0.5, 4).unwrap()).unwrap();
        for it in &trace.iterates {
            for (a, b) in it.protos.to_flat().iter().zip(p0.to_flat()) {
                assert!((a - b).abs() < 1e-8);
            }
            assert_eq!(it.rho, 1.0);
        }
    }

    #[test]
    fn fusion_weight_cases() {
        let mut rng = SeededRng::new(31);
        let s = random_support(&mut rng, 4, 4, 3);
        let q = FeatureMap::new(4, 4, 3, (0..48).map(|_| rng.normal()).collect()).unwrap();
        let cfg = InferenceConfig::new(MetricKind::Cosine, 10.0).unwrap();
        let p0 = build_prototype_set(&s).unwrap();
        let mut trace =
            refine_prototypes(&p0, &s, &cfg, &IqiConfig::new(0.5, 3).unwrap()).unwrap();

        for it in &mut trace.iterates {
            it.rho = 0.0;
        }
        assert!(trace.is_degenerate());
        assert_eq!(
            fused_prediction(&q, &trace, &cfg).unwrap(),
            MaskMap::filled(4, 4, 0)
        );

        trace.iterates[0].rho = 1.0;
        assert_eq!(
            fused_prediction(&q, &trace, &cfg).unwrap(),
            predict(&q, &p0, &cfg).unwrap()
        );
    }

    #[test]
    fn divergence_is_flagged() {
        let mut rng = SeededRng::new(32);
        let s = random_support(&mut rng, 4, 4, 3);
        let p0 = build_prototype_set(&s).unwrap();
        let cfg = InferenceConfig::new(MetricKind::SqEuclidean, 10.0).unwrap();
        let trace = refine_prototypes(&p0, &s, &cfg, &IqiConfig::new(50.0, 3).unwrap()).unwrap();
        assert!(!trace.warnings.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(IqiConfig::new(0.0, 3).is_err());
        assert!(IqiConfig::new(0.1, 0).is_err());
        assert_eq!(IqiConfig::default().num_prototypes, 5);
    }
}
