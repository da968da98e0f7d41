//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use protoseg::data::{Episode, MaskMap, Sample};
use protoseg::prototype::{FeatureMap, SupportSet};
use protoseg::rng::SeededRng;

pub fn feature_map(rng: &mut SeededRng, h: usize, w: usize, d: usize, scale: f64) -> FeatureMap {
    FeatureMap::new(h, w, d, (0..h * w * d).map(|_| scale * rng.normal()).collect()).unwrap()
}

/// Random labels in `0..=classes` with `must` forced at pixel 1 and
/// background at pixel 0.
pub fn mask(rng: &mut SeededRng, h: usize, w: usize, classes: usize, must: u16) -> MaskMap {
    let mut labels: Vec<u16> = (0..h * w)
        .map(|_| rng.below(classes as u64 + 1) as u16)
        .collect();
    labels[0] = 0;
    labels[1] = must;
    MaskMap::new(h, w, labels).unwrap()
}

pub struct RawSupport {
    pub features: Vec<Vec<FeatureMap>>,
    pub masks: Vec<Vec<MaskMap>>,
}

impl RawSupport {
    pub fn random(rng: &mut SeededRng, c: usize, k: usize, h: usize, w: usize, d: usize) -> Self {
        let mut features = Vec::new();
        let mut masks = Vec::new();
        for class in 1..=c {
            features.push((0..k).map(|_| feature_map(rng, h, w, d, 1.0)).collect());
            masks.push((0..k).map(|_| mask(rng, h, w, c, class as u16)).collect());
        }
        Self { features, masks }
    }

    pub fn support_set(&self) -> SupportSet {
        SupportSet::new(self.features.clone(), self.masks.clone()).unwrap()
    }
}

/// Pixel-loop masked average pooling: per shot mean over the label's pixels,
/// then the plain average over shots that contain the label.
pub fn oracle_pool(pairs: &[(&FeatureMap, &MaskMap)], label: u16) -> Option<Vec<f64>> {
    let d = pairs[0].0.channels();
    let mut acc = vec![0.0; d];
    let mut shots = 0usize;
    for (f, m) in pairs {
        let mut sum = vec![0.0; d];
        let mut n = 0usize;
        for y in 0..m.height {
            for x in 0..m.width {
                if m.labels[y * m.width + x] == label {
                    n += 1;
                    for (ch, s) in sum.iter_mut().enumerate() {
                        *s += f.data()[(y * m.width + x) * d + ch];
                    }
                }
            }
        }
        if n > 0 {
            shots += 1;
            for (a, s) in acc.iter_mut().zip(sum) {
                *a += s / n as f64;
            }
        }
    }
    (shots > 0).then(|| acc.into_iter().map(|a| a / shots as f64).collect())
}

/// Relative error of a gradient coordinate, or `None` when both sides are
/// at most `negligible` in magnitude and the coordinate is not compared.
pub fn grad_rel_err(a: f64, b: f64, negligible: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs());
    (scale > negligible).then(|| (a - b).abs() / scale)
}

pub fn rgb(rng: &mut SeededRng, h: usize, w: usize) -> FeatureMap {
    FeatureMap::new(h, w, 3, (0..h * w * 3).map(|_| rng.uniform()).collect()).unwrap()
}

/// Small random episode of RGB images with episode-local masks.
pub fn rgb_episode(rng: &mut SeededRng, h: usize, w: usize, way: usize, shot: usize) -> Episode {
    let support = (1..=way)
        .map(|c| {
            (0..shot)
                .map(|_| Sample {
                    item: 0,
                    image: rgb(rng, h, w),
                    mask: mask(rng, h, w, way, c as u16),
                })
                .collect()
        })
        .collect();
    let must = 1 + rng.below(way as u64) as u16;
    let query = vec![Sample {
        item: 0,
        image: rgb(rng, h, w),
        mask: mask(rng, h, w, way, must),
    }];
    Episode {
        class_ids: (1..=way as u16).collect(),
        support,
        query,
    }
}
