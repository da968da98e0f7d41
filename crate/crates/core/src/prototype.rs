//! Feature maps and masked-average-pooling prototypes.
//!
//! A foreground prototype averages, per shot, the feature vectors under the
//! class mask, then averages those per-shot means over the shots that
//! actually contain the class. The background prototype does the same over
//! every support image of the episode.

use crate::data::{resize_mask_nearest, MaskMap, BACKGROUND};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Dense H×W×D embedding of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    tensor: Tensor,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::ShapeMismatch("feature map needs D >= 1".into()));
        }
        Ok(Self {
            tensor: Tensor::new(vec![height, width, channels], data)?,
        })
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        match *tensor.shape() {
            [_, _, d] if d >= 1 => Ok(Self { tensor }),
            _ => Err(Error::ShapeMismatch(format!(
                "feature map must be H×W×D with D >= 1, got {:?}",
                tensor.shape()
            ))),
        }
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn pixel_count(&self) -> usize {
        self.height() * self.width()
    }

    /// Feature vector at flat pixel index `p = y * W + x`.
    pub fn pixel(&self, p: usize) -> &[f64] {
        let d = self.channels();
        &self.tensor.data()[p * d..(p + 1) * d]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.tensor.data().chunks(self.channels())
    }

    pub fn data(&self) -> &[f64] {
        self.tensor.data()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor {
        self.tensor
    }
}

/// Background prototype plus `C` foreground prototypes. Index 0 is the
/// background, indices `1..=C` are the episode classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    vectors: Vec<Vec<f64>>,
}

impl PrototypeSet {
    pub fn new(background: Vec<f64>, foreground: Vec<Vec<f64>>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(foreground.len() + 1);
        vectors.push(background);
        vectors.extend(foreground);
        Self::from_vectors(vectors)
    }

    /// `vectors[0]` is the background prototype.
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::ShapeMismatch(
                "prototype set needs a background and at least one class".into(),
            ));
        }
        let d = vectors[0].len();
        if d == 0 {
            return Err(Error::ShapeMismatch("prototype dimension is zero".into()));
        }
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "prototype {j} has length {}, expected {d}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::ShapeMismatch(format!("prototype {j} is not finite")));
            }
        }
        Ok(Self { vectors })
    }

    pub fn class_count(&self) -> usize {
        self.vectors.len() - 1
    }

    /// Number of prototypes, `C + 1`.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn background(&self) -> &[f64] {
        &self.vectors[0]
    }

    /// Prototype of episode class `c` in `1..=C`.
    pub fn foreground(&self, c: usize) -> &[f64] {
        &self.vectors[c]
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.vectors[j]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.vectors
    }

    /// Flattened view, background first.
    pub fn to_flat(&self) -> Vec<f64> {
        self.vectors.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[f64], count: usize) -> Result<Self> {
        if count == 0 || flat.len() % count != 0 {
            return Err(Error::ShapeMismatch(format!(
                "cannot split {} values into {count} prototypes",
                flat.len()
            )));
        }
        let d = flat.len() / count;
        Self::from_vectors(flat.chunks(d).map(<[f64]>::to_vec).collect())
    }
}

/// Support features and masks of one episode, indexed `[class][shot]` with
/// classes in episode-local order `1..=C`. Masks are stored at feature
/// resolution.
#[derive(Debug, Clone)]
pub struct SupportSet {
    features: Vec<Vec<FeatureMap>>,
    masks: Vec<Vec<MaskMap>>,
}

impl SupportSet {
    /// Masks whose size differs from their feature map are resampled with
    /// nearest-neighbour lookup.
    pub fn new(features: Vec<Vec<FeatureMap>>, masks: Vec<Vec<MaskMap>>) -> Result<Self> {
        if features.is_empty() || features.len() != masks.len() {
            return Err(Error::ShapeMismatch(format!(
                "support has {} feature groups and {} mask groups",
                features.len(),
                masks.len()
            )));
        }
        let dim = features[0]
            .first()
            .map(FeatureMap::channels)
            .ok_or_else(|| Error::ShapeMismatch("class with no support shots".into()))?;
        let mut resized = Vec::with_capacity(masks.len());
        for (c, (fs, ms)) in features.iter().zip(masks).enumerate() {
            if fs.is_empty() || fs.len() != ms.len() {
                return Err(Error::ShapeMismatch(format!(
                    "class {} has {} features and {} masks",
                    c + 1,
                    fs.len(),
                    ms.len()
                )));
            }
            let mut group = Vec::with_capacity(ms.len());
            for (f, m) in fs.iter().zip(ms) {
                if f.channels() != dim {
                    return Err(Error::ShapeMismatch(format!(
                        "support feature has D={}, expected {dim}",
                        f.channels()
                    )));
                }
                group.push(if (m.height, m.width) == (f.height(), f.width()) {
                    m
                } else {
                    resize_mask_nearest(&m, f.height(), f.width())
                });
            }
            resized.push(group);
        }
        Ok(Self {
            features,
            masks: resized,
        })
    }

    pub fn class_count(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.features[0][0].channels()
    }

    pub fn features(&self) -> &[Vec<FeatureMap>] {
        &self.features
    }

    pub fn masks(&self) -> &[Vec<MaskMap>] {
        &self.masks
    }

    /// All `(feature, mask)` pairs in class-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (&FeatureMap, &MaskMap)> {
        self.features
            .iter()
            .zip(&self.masks)
            .flat_map(|(fs, ms)| fs.iter().zip(ms))
    }

    pub fn image_count(&self) -> usize {
        self.features.iter().map(Vec::len).sum()
    }
}

fn check_pair(f: &FeatureMap, m: &MaskMap) -> Result<()> {
    if (f.height(), f.width()) != (m.height, m.width) {
        return Err(Error::ShapeMismatch(format!(
            "mask {}×{} does not match feature map {}×{}",
            m.height,
            m.width,
            f.height(),
            f.width()
        )));
    }
    Ok(())
}

/// Mean feature vector over pixels labelled `label`, or `None` if the mask
/// has no such pixel.
pub fn masked_mean(f: &FeatureMap, m: &MaskMap, label: u16) -> Result<Option<Vec<f64>>> {
    check_pair(f, m)?;
    let mut sum = vec![0.0; f.channels()];
    let mut count = 0usize;
    for (v, &l) in f.pixels().zip(&m.labels) {
        if l == label {
            count += 1;
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
    }
    if count == 0 {
        return Ok(None);
    }
    let n = count as f64;
    Ok(Some(sum.into_iter().map(|s| s / n).collect()))
}

fn mean_of_means<'a>(
    pairs: impl Iterator<Item = (&'a FeatureMap, &'a MaskMap)>,
    label: u16,
    dim: usize,
) -> Result<Option<Vec<f64>>> {
    let mut means = Vec::new();
    for (f, m) in pairs {
        if let Some(mean) = masked_mean(f, m, label)? {
            means.push(mean);
        }
    }
    if means.is_empty() {
        return Ok(None);
    }
    // Canonical summation order makes the result independent of shot order.
    means.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut acc = vec![0.0; dim];
    for mean in &means {
        for (a, x) in acc.iter_mut().zip(mean) {
            *a += x;
        }
    }
    let n = means.len() as f64;
    Ok(Some(acc.into_iter().map(|a| a / n).collect()))
}

/// Prototype of `class` from its K support shots. Shots without any pixel
/// of the class are left out of the shot average.
pub fn foreground_prototype(
    features: &[FeatureMap],
    masks: &[MaskMap],
    class: u16,
) -> Result<Vec<f64>> {
    if features.len() != masks.len() || features.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} support features vs {} masks",
            features.len(),
            masks.len()
        )));
    }
    mean_of_means(
        features.iter().zip(masks),
        class,
        features[0].channels(),
    )?
    .ok_or(Error::EmptyClassMask { class })
}

/// Background prototype over all C·K support images. Images without
/// background pixels are left out of the image average.
pub fn background_prototype<'a>(
    pairs: impl IntoIterator<Item = (&'a FeatureMap, &'a MaskMap)>,
) -> Result<Vec<f64>> {
    let mut iter = pairs.into_iter().peekable();
    let dim = match iter.peek() {
        Some((f, _)) => f.channels(),
        None => return Err(Error::EmptyBackground),
    };
    mean_of_means(iter, BACKGROUND, dim)?.ok_or(Error::EmptyBackground)
}

pub fn build_prototype_set(support: &SupportSet) -> Result<PrototypeSet> {
    let foreground = support
        .features()
        .iter()
        .zip(support.masks())
        .enumerate()
        .map(|(c, (fs, ms))| foreground_prototype(fs, ms, (c + 1) as u16))
        .collect::<Result<Vec<_>>>()?;
    let background = background_prototype(support.pairs())?;
    PrototypeSet::new(background, foreground)
}
