//! Deterministic synthetic shape dataset.
//!
//! Each image holds 1–3 filled shapes on a textured background. A shape's
//! class fixes both its geometry and its base colour; per-shape colour jitter
//! and additive Gaussian pixel noise make the classes overlap a little.
//! Shapes are painted in order, so later shapes occlude earlier ones in both
//! the raster and the mask.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::{save_feature_map, save_mask};
use super::manifest::{ClassEntry, DatasetManifest, ItemEntry, Split};
use super::{MaskMap, BACKGROUND};
use crate::error::{Error, Result};
use crate::prototype::FeatureMap;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub height: usize,
    pub width: usize,
    /// Number of non-background classes; ids are `1..=class_count`.
    pub class_count: usize,
    /// The last `unseen_count` class ids form the unseen split.
    pub unseen_count: usize,
    pub images_seen: usize,
    pub images_unseen: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
    /// Shape radius range as a fraction of `min(height, width)`.
    pub min_radius_frac: f64,
    pub max_radius_frac: f64,
    pub noise_std: f64,
    /// Uniform per-channel jitter applied to a shape's base colour.
    pub color_jitter: f64,
    /// Base RGB colour per class, index `c - 1`. Empty means evenly spaced hues.
    pub palette: Vec<[f64; 3]>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            height: 48,
            width: 48,
            class_count: 6,
            unseen_count: 2,
            images_seen: 160,
            images_unseen: 80,
            min_shapes: 1,
            max_shapes: 3,
            min_radius_frac: 0.12,
            max_radius_frac: 0.23,
            noise_std: 0.06,
            color_jitter: 0.12,
            palette: Vec::new(),
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(Error::Config("synthetic images must be at least 16×16".into()));
        }
        if self.class_count < 2 {
            return Err(Error::Config("synthetic dataset needs at least 2 classes".into()));
        }
        if self.unseen_count == 0 || self.unseen_count >= self.class_count {
            return Err(Error::Config(
                "unseen_count must be in 1..class_count".into(),
            ));
        }
        if self.min_shapes == 0 || self.min_shapes > self.max_shapes {
            return Err(Error::Config("need 1 <= min_shapes <= max_shapes".into()));
        }
        if !(self.min_radius_frac > 0.0 && self.min_radius_frac <= self.max_radius_frac)
            || self.max_radius_frac > 0.3
        {
            return Err(Error::Config(
                "radius fractions must satisfy 0 < min <= max <= 0.3".into(),
            ));
        }
        if !(self.noise_std >= 0.0) || !(self.color_jitter >= 0.0) {
            return Err(Error::Config("noise and jitter must be non-negative".into()));
        }
        if !self.palette.is_empty() && self.palette.len() != self.class_count {
            return Err(Error::Config(format!(
                "palette has {} colours for {} classes",
                self.palette.len(),
                self.class_count
            )));
        }
        Ok(())
    }

    pub fn class_color(&self, class: u16) -> [f64; 3] {
        if let Some(c) = self.palette.get(class as usize - 1) {
            return *c;
        }
        let hue = (class as f64 - 1.0) / self.class_count as f64;
        hsv_to_rgb(hue, 0.75, 0.85)
    }

    pub fn seen_classes(&self) -> Vec<u16> {
        (1..=(self.class_count - self.unseen_count) as u16).collect()
    }

    pub fn unseen_classes(&self) -> Vec<u16> {
        ((self.class_count - self.unseen_count + 1) as u16..=self.class_count as u16).collect()
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
    Diamond,
    Ring,
    Cross,
}

impl ShapeKind {
    const ALL: [ShapeKind; 6] = [
        ShapeKind::Circle,
        ShapeKind::Square,
        ShapeKind::Triangle,
        ShapeKind::Diamond,
        ShapeKind::Ring,
        ShapeKind::Cross,
    ];

    pub fn for_class(class: u16) -> Self {
        Self::ALL[(class as usize - 1) % Self::ALL.len()]
    }

    /// Whether the point `(dy, dx)`, measured from the shape centre, is inside
    /// a shape of radius `r`.
    pub fn contains(self, dy: f64, dx: f64, r: f64) -> bool {
        match self {
            ShapeKind::Circle => dy * dy + dx * dx <= r * r,
            ShapeKind::Square => dy.abs() <= 0.85 * r && dx.abs() <= 0.85 * r,
            ShapeKind::Triangle => {
                // Apex up at (-r, 0), base along dy = 0.7r.
                let top = -r;
                let base = 0.7 * r;
                if dy < top || dy > base {
                    return false;
                }
                let half = 0.9 * r * (dy - top) / (base - top);
                dx.abs() <= half
            }
            ShapeKind::Diamond => dy.abs() + dx.abs() <= r,
            ShapeKind::Ring => {
                let d2 = dy * dy + dx * dx;
                d2 <= r * r && d2 >= 0.3 * r * r
            }
            ShapeKind::Cross => {
                (dx.abs() <= 0.3 * r && dy.abs() <= r) || (dy.abs() <= 0.3 * r && dx.abs() <= r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub class: u16,
    pub kind: ShapeKind,
    pub center_y: f64,
    pub center_x: f64,
    pub radius: f64,
    pub color: [f64; 3],
}

impl ShapeSpec {
    /// Pixel `(y, x)` is covered when its centre lies inside the shape.
    pub fn covers(&self, y: usize, x: usize) -> bool {
        let dy = y as f64 + 0.5 - self.center_y;
        let dx = x as f64 + 0.5 - self.center_x;
        self.kind.contains(dy, dx, self.radius)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Background {
    base: [f64; 3],
    amp: [f64; 3],
    freq_y: f64,
    freq_x: f64,
    phase: f64,
}

impl Background {
    fn random(rng: &mut SeededRng) -> Self {
        let gray = rng.uniform_range(0.25, 0.6);
        let mut base = [0.0; 3];
        for b in &mut base {
            *b = gray + rng.uniform_range(-0.12, 0.12);
        }
        let mut amp = [0.0; 3];
        for a in &mut amp {
            *a = rng.uniform_range(0.03, 0.15);
        }
        Self {
            base,
            amp,
            freq_y: rng.uniform_range(0.1, 0.6),
            freq_x: rng.uniform_range(0.1, 0.6),
            phase: rng.uniform_range(0.0, std::f64::consts::TAU),
        }
    }

    fn at(&self, y: usize, x: usize) -> [f64; 3] {
        let wave = (self.freq_y * y as f64 + self.freq_x * x as f64 + self.phase).sin();
        let mut out = self.base;
        for ((o, a), k) in out.iter_mut().zip(&self.amp).zip([1.0, -0.7, 0.4]) {
            *o += a * wave * k;
        }
        out
    }
}

/// Paints `shapes` in order over `background` and adds per-pixel noise.
fn paint(
    cfg: &SyntheticConfig,
    background: &Background,
    shapes: &[ShapeSpec],
    rng: &mut SeededRng,
) -> Result<(FeatureMap, MaskMap)> {
    let (h, w) = (cfg.height, cfg.width);
    let mut raster = Vec::with_capacity(h * w * 3);
    let mut labels = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut color = background.at(y, x);
            let mut label = BACKGROUND;
            for s in shapes {
                if s.covers(y, x) {
                    color = s.color;
                    label = s.class;
                }
            }
            for c in color {
                let noise = if cfg.noise_std > 0.0 {
                    cfg.noise_std * rng.normal()
                } else {
                    0.0
                };
                raster.push(c + noise);
            }
            labels.push(label);
        }
    }
    Ok((FeatureMap::new(h, w, 3, raster)?, MaskMap::new(h, w, labels)?))
}

/// Renders explicit shapes on a seeded random background.
pub fn render_item(
    cfg: &SyntheticConfig,
    shapes: &[ShapeSpec],
    seed: u64,
) -> Result<(FeatureMap, MaskMap)> {
    let mut rng = SeededRng::new(seed);
    let background = Background::random(&mut rng);
    paint(cfg, &background, shapes, &mut rng)
}

fn random_shape(cfg: &SyntheticConfig, class: u16, rng: &mut SeededRng) -> ShapeSpec {
    let side = cfg.height.min(cfg.width) as f64;
    let radius = side * rng.uniform_range(cfg.min_radius_frac, cfg.max_radius_frac);
    let center_y = rng.uniform_range(radius, cfg.height as f64 - radius);
    let center_x = rng.uniform_range(radius, cfg.width as f64 - radius);
    let base = cfg.class_color(class);
    let mut color = [0.0; 3];
    for (c, b) in color.iter_mut().zip(base) {
        *c = b + rng.uniform_range(-cfg.color_jitter, cfg.color_jitter);
    }
    ShapeSpec {
        class,
        kind: ShapeKind::for_class(class),
        center_y,
        center_x,
        radius,
        color,
    }
}

/// Draws the shape list for one item. Unseen-split items always include an
/// unseen class first; remaining shapes come from that split's pool.
fn random_layout(cfg: &SyntheticConfig, split: Split, rng: &mut SeededRng) -> Vec<ShapeSpec> {
    let n = rng.int_inclusive(cfg.min_shapes as i64, cfg.max_shapes as i64) as usize;
    let seen = cfg.seen_classes();
    let unseen = cfg.unseen_classes();
    let all: Vec<u16> = (1..=cfg.class_count as u16).collect();
    let mut shapes = Vec::with_capacity(n);
    for i in 0..n {
        let pool: &[u16] = match (split, i) {
            (Split::Seen, _) => &seen,
            (Split::Unseen, 0) => &unseen,
            (Split::Unseen, _) => &all,
        };
        let class = pool[rng.below(pool.len() as u64) as usize];
        shapes.push(random_shape(cfg, class, rng));
    }
    shapes
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

pub fn generate_synthetic_dataset(
    cfg: &SyntheticConfig,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    let root = out_dir.as_ref();
    create_dir(&root.join("images"))?;
    create_dir(&root.join("masks"))?;

    let classes = (1..=cfg.class_count as u16)
        .map(|id| ClassEntry {
            id,
            name: format!("{:?}-{id}", ShapeKind::for_class(id)).to_lowercase(),
        })
        .collect();

    let plan = std::iter::repeat(Split::Seen)
        .take(cfg.images_seen)
        .chain(std::iter::repeat(Split::Unseen).take(cfg.images_unseen));
    let mut items = Vec::with_capacity(cfg.images_seen + cfg.images_unseen);
    for (i, split) in plan.enumerate() {
        let mut rng = SeededRng::derive(cfg.seed, i as u64);
        let shapes = random_layout(cfg, split, &mut rng);
        let background = Background::random(&mut rng);
        let (image, mask) = paint(cfg, &background, &shapes, &mut rng)?;
        let image_rel = format!("images/{i:05}.pseg");
        let mask_rel = format!("masks/{i:05}.pseg");
        save_feature_map(&image, root.join(&image_rel))?;
        save_mask(&mask, root.join(&mask_rel))?;
        items.push(ItemEntry {
            image: image_rel,
            mask: mask_rel,
            classes_present: mask.classes_present(),
            split,
        });
    }

    let manifest = DatasetManifest::new(
        root,
        classes,
        cfg.seen_classes(),
        cfg.unseen_classes(),
        items,
    )?;
    manifest.save()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent disk rasterizer: for each row, solve for the horizontal
    /// extent of pixel centres inside the circle.
    fn disk_area_by_rows(cy: f64, cx: f64, r: f64, h: usize, w: usize) -> usize {
        let mut count = 0;
        for y in 0..h {
            let dy = y as f64 + 0.5 - cy;
            if dy * dy > r * r {
                continue;
            }
            let half = (r * r - dy * dy).sqrt();
            let lo = (cx - half - 0.5).ceil().max(0.0) as i64;
            let hi = (cx + half - 0.5).floor().min(w as f64 - 1.0) as i64;
            if hi >= lo {
                count += (hi - lo + 1) as usize;
            }
        }
        count
    }

    #[test]
    fn circle_mask_matches_row_rasterizer() {
        let cfg = SyntheticConfig {
            noise_std: 0.0,
            ..Default::default()
        };
        for (cy, cx, r) in [(20.3, 17.9, 7.4), (24.0, 24.0, 10.0), (10.5, 30.25, 5.1)] {
            let shape = ShapeSpec {
                class: 3,
                kind: ShapeKind::Circle,
                center_y: cy,
                center_x: cx,
                radius: r,
                color: [0.9, 0.1, 0.1],
            };
            let (image, mask) = render_item(&cfg, &[shape], 1).unwrap();
            let expected = disk_area_by_rows(cy, cx, r, cfg.height, cfg.width);
            assert_eq!(mask.count(3), expected);
            // Zero noise: every class-3 pixel carries exactly the shape colour.
            for (p, &l) in mask.labels.iter().enumerate() {
                if l == 3 {
                    assert_eq!(image.pixel(p), &[0.9, 0.1, 0.1]);
                }
            }
        }
    }

    #[test]
    fn later_shapes_win() {
        let cfg = SyntheticConfig::default();
        let a = ShapeSpec {
            class: 1,
            kind: ShapeKind::Square,
            center_y: 20.0,
            center_x: 20.0,
            radius: 8.0,
            color: [1.0, 0.0, 0.0],
        };
        let b = ShapeSpec {
            class: 2,
            center_x: 24.0,
            ..a.clone()
        };
        let (_, mask) = render_item(&cfg, &[a.clone(), b.clone()], 3).unwrap();
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                let expected = if b.covers(y, x) {
                    2
                } else if a.covers(y, x) {
                    1
                } else {
                    0
                };
                assert_eq!(mask.get(y, x), expected);
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = SyntheticConfig {
            height: 8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SyntheticConfig {
            class_count: 1,
            unseen_count: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(SyntheticConfig::default().validate().is_ok());
    }

    #[test]
    fn splits_partition_classes() {
        let cfg = SyntheticConfig::default();
        assert_eq!(cfg.seen_classes(), vec![1, 2, 3, 4]);
        assert_eq!(cfg.unseen_classes(), vec![5, 6]);
    }
}
