//! Episodic data: label masks, the binary tensor format, the synthetic shape
//! dataset and its manifest, and C-way K-shot episode sampling.

mod format;
mod manifest;
mod sampler;
mod synthetic;

pub use format::{
    decode_feature_map, decode_mask, decode_tensor_list, encode_feature_map, encode_mask,
    encode_tensor_list, load_feature_map, load_mask, load_tensor_list, save_feature_map,
    save_mask, save_tensor_list, FORMAT_VERSION, KIND_FEATURE, KIND_MASK, KIND_WEIGHTS, MAGIC,
};
pub use manifest::{ClassEntry, DatasetManifest, ItemEntry, Split, MANIFEST_FILE};
pub use sampler::{sample_episode, Episode, EpisodeInputs, QueryTruth, Sample};
pub use synthetic::{
    generate_synthetic_dataset, render_item, ShapeKind, ShapeSpec,
    SyntheticConfig,
};

use crate::error::{Error, Result};
use crate::numerics::nearest_source;

/// Label of background pixels.
pub const BACKGROUND: u16 = 0;

/// H×W integer class labels, row-major, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u16>,
}

impl MaskMap {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask {height}×{width} needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, label: u16) -> Self {
        Self {
            height,
            width,
            labels: vec![label; height * width],
        }
    }

    pub fn get(&self, y: usize, x: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn count(&self, label: u16) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn contains(&self, label: u16) -> bool {
        self.labels.contains(&label)
    }

    /// Sorted distinct non-background labels.
    pub fn classes_present(&self) -> Vec<u16> {
        let mut seen: Vec<u16> = self
            .labels
            .iter()
            .copied()
            .filter(|&l| l != BACKGROUND)
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    /// Rewrites labels through `f`.
    pub fn map_labels(&self, f: impl Fn(u16) -> u16) -> Self {
        Self {
            height: self.height,
            width: self.width,
            labels: self.labels.iter().map(|&l| f(l)).collect(),
        }
    }
}

/// Nearest-neighbour label resampling; never introduces new labels.
pub fn resize_mask_nearest(m: &MaskMap, new_h: usize, new_w: usize) -> MaskMap {
    let mut labels = Vec::with_capacity(new_h * new_w);
    for y in 0..new_h {
        let sy = nearest_source(y, m.height, new_h);
        for x in 0..new_w {
            let sx = nearest_source(x, m.width, new_w);
            labels.push(m.labels[sy * m.width + sx]);
        }
    }
    MaskMap {
        height: new_h,
        width: new_w,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn downsize_uniform_mask() {
        let m = MaskMap::filled(4, 4, 2);
        assert_eq!(resize_mask_nearest(&m, 2, 2), MaskMap::filled(2, 2, 2));
    }

    #[test]
    fn identity_resize() {
        let m = MaskMap::new(2, 3, vec![0, 1, 2, 3, 0, 1]).unwrap();
        assert_eq!(resize_mask_nearest(&m, 2, 3), m);
    }

    #[test]
    fn upsize_blocks() {
        let m = MaskMap::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        let r = resize_mask_nearest(&m, 4, 4);
        #[rustfmt::skip]
        let expected = vec![
            1, 1, 0, 0,
            1, 1, 0, 0,
            0, 0, 1, 1,
            0, 0, 1, 1,
        ];
        assert_eq!(r.labels, expected);
    }

    #[test]
    fn classes_present_is_sorted_and_unique() {
        let m = MaskMap::new(1, 5, vec![3, 0, 1, 3, 1]).unwrap();
        assert_eq!(m.classes_present(), vec![1, 3]);
    }

    proptest! {
        #[test]
        fn resize_introduces_no_new_labels(
            h in 1usize..8, w in 1usize..8, nh in 1usize..12, nw in 1usize..12,
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::SeededRng::new(seed);
            let labels = (0..h * w).map(|_| rng.below(4) as u16).collect();
            let m = MaskMap::new(h, w, labels).unwrap();
            let r = resize_mask_nearest(&m, nh, nw);
            prop_assert_eq!(r.labels.len(), nh * nw);
            prop_assert!(r.labels.iter().all(|l| m.labels.contains(l)));
        }
    }
}
