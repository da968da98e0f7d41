//! C-way K-shot episode sampling.

use super::manifest::{DatasetManifest, Split};
use super::{MaskMap, BACKGROUND};
use crate::error::{Error, Result};
use crate::prototype::FeatureMap;
use crate::rng::SeededRng;

/// One image of an episode with its mask in episode-local labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Index into the manifest's item list.
    pub item: usize,
    pub image: FeatureMap,
    pub mask: MaskMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Global class id of episode class `i + 1`.
    pub class_ids: Vec<u16>,
    /// `support[c][k]` is shot `k` of episode class `c + 1`.
    pub support: Vec<Vec<Sample>>,
    pub query: Vec<Sample>,
}

/// Everything a predictor may see: support pairs and bare query images.
#[derive(Debug, Clone)]
pub struct EpisodeInputs {
    pub class_ids: Vec<u16>,
    pub support: Vec<Vec<Sample>>,
    pub query_images: Vec<FeatureMap>,
}

/// Query ground truth, kept apart from [`EpisodeInputs`] until scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTruth {
    pub masks: Vec<MaskMap>,
}

impl Episode {
    pub fn way(&self) -> usize {
        self.class_ids.len()
    }

    pub fn shot(&self) -> usize {
        self.support.first().map_or(0, Vec::len)
    }

    pub fn query_count(&self) -> usize {
        self.query.len()
    }

    pub fn split_truth(self) -> (EpisodeInputs, QueryTruth) {
        let (query_images, masks) = self.query.into_iter().map(|s| (s.image, s.mask)).unzip();
        (
            EpisodeInputs {
                class_ids: self.class_ids,
                support: self.support,
                query_images,
            },
            QueryTruth { masks },
        )
    }

    /// Checks the structural episode contract.
    pub fn check(&self) -> Result<()> {
        let c = self.way();
        let k = self.shot();
        if c == 0 || k == 0 || self.query.is_empty() {
            return Err(Error::ShapeMismatch("episode needs C, K, N_q >= 1".into()));
        }
        if self.support.len() != c || self.support.iter().any(|s| s.len() != k) {
            return Err(Error::ShapeMismatch(
                "support must hold exactly K shots per class".into(),
            ));
        }
        for (ci, shots) in self.support.iter().enumerate() {
            for s in shots {
                if !s.mask.contains((ci + 1) as u16) {
                    return Err(Error::EmptyClassMask {
                        class: (ci + 1) as u16,
                    });
                }
            }
        }
        let max = c as u16;
        let all = self.support.iter().flatten().chain(&self.query);
        if all.clone().any(|s| s.mask.labels.iter().any(|&l| l > max)) {
            return Err(Error::ShapeMismatch("mask label outside episode".into()));
        }
        Ok(())
    }
}

/// Maps global labels to episode-local ones: class `class_ids[i]` becomes
/// `i + 1`, everything else becomes background.
fn remap(mask: &MaskMap, class_ids: &[u16]) -> MaskMap {
    mask.map_labels(|l| {
        class_ids
            .iter()
            .position(|&c| c == l)
            .map_or(BACKGROUND, |i| (i + 1) as u16)
    })
}

fn load_sample(manifest: &DatasetManifest, item: usize, class_ids: &[u16]) -> Result<Sample> {
    let loaded = manifest.item(item)?;
    Ok(Sample {
        item,
        image: loaded.0.clone(),
        mask: remap(&loaded.1, class_ids),
    })
}

/// Samples a C-way K-shot episode with `queries` query images from one split.
///
/// Classes are drawn uniformly without replacement; each class then draws K
/// distinct support images containing it. Each query draws an episode class
/// uniformly, then an unused image containing it. No image is used twice.
pub fn sample_episode(
    manifest: &DatasetManifest,
    split: Split,
    way: usize,
    shot: usize,
    queries: usize,
    seed: u64,
) -> Result<Episode> {
    if way == 0 || shot == 0 || queries == 0 {
        return Err(Error::Config("episode needs C, K, N_q >= 1".into()));
    }
    let pool = manifest.split_classes(split);
    if pool.len() < way {
        return Err(Error::InsufficientClasses {
            available: pool.len(),
            requested: way,
        });
    }
    let mut rng = SeededRng::new(seed);
    let class_ids = rng.choose_distinct(pool, way);

    let mut used = vec![false; manifest.items.len()];
    let eligible = |class: u16, used: &[bool]| -> Vec<usize> {
        manifest
            .items
            .iter()
            .enumerate()
            .filter(|(i, it)| !used[*i] && it.split == split && it.classes_present.contains(&class))
            .map(|(i, _)| i)
            .collect()
    };

    let mut support_items = Vec::with_capacity(way);
    for &class in &class_ids {
        let candidates = eligible(class, &used);
        if candidates.len() < shot {
            return Err(Error::InsufficientImages {
                class,
                available: candidates.len(),
                requested: shot,
            });
        }
        let picked = rng.choose_distinct(&candidates, shot);
        for &i in &picked {
            used[i] = true;
        }
        support_items.push(picked);
    }

    let mut query_items = Vec::with_capacity(queries);
    for _ in 0..queries {
        let class = class_ids[rng.below(way as u64) as usize];
        let candidates = eligible(class, &used);
        if candidates.is_empty() {
            return Err(Error::InsufficientImages {
                class,
                available: 0,
                requested: 1,
            });
        }
        let i = candidates[rng.below(candidates.len() as u64) as usize];
        used[i] = true;
        query_items.push(i);
    }

    let support = support_items
        .iter()
        .map(|shots| {
            shots
                .iter()
                .map(|&i| load_sample(manifest, i, &class_ids))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let query = query_items
        .iter()
        .map(|&i| load_sample(manifest, i, &class_ids))
        .collect::<Result<Vec<_>>>()?;
    Ok(Episode {
        class_ids,
        support,
        query,
    })
}
