//! Segmentation metrics and run-level aggregation.
//!
//! Per-class IoU is `tp / (tp + fp + fn)` and Dice is `2tp / (2tp + fp + fn)`,
//! computed from pixel counts accumulated over a whole evaluation run and then
//! averaged over the classes that appear in either prediction or ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{MaskMap, BACKGROUND};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn union(&self) -> u64 {
        self.tp + self.fp + self.fn_
    }

    /// `None` when the class is absent from both prediction and truth.
    pub fn iou(&self) -> Option<f64> {
        let u = self.union();
        (u > 0).then(|| self.tp as f64 / u as f64)
    }

    pub fn dice(&self) -> Option<f64> {
        let d = 2 * self.tp + self.fp + self.fn_;
        (d > 0).then(|| 2.0 * self.tp as f64 / d as f64)
    }
}

/// Foreground pixel counts keyed by class id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: BTreeMap<u16, ClassCounts>,
}

impl Confusion {
    pub fn from_counts(counts: impl IntoIterator<Item = (u16, ClassCounts)>) -> Self {
        Self {
            classes: counts.into_iter().collect(),
        }
    }

    pub fn get(&self, class: u16) -> ClassCounts {
        self.classes.get(&class).copied().unwrap_or_default()
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (&c, k) in &other.classes {
            let e = self.classes.entry(c).or_default();
            e.tp += k.tp;
            e.fp += k.fp;
            e.fn_ += k.fn_;
        }
    }

    /// Renames class keys through `map`; keys missing from `map` are kept.
    pub fn relabel(&self, map: impl Fn(u16) -> u16) -> Confusion {
        let mut out = Confusion::default();
        for (&c, k) in &self.classes {
            out.merge(&Confusion::from_counts([(map(c), *k)]));
        }
        out
    }
}

/// Pixel counts for foreground classes `1..=classes`.
pub fn confusion(pred: &MaskMap, gt: &MaskMap, classes: usize) -> Result<Confusion> {
    if (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}×{} vs truth {}×{}",
            pred.height, pred.width, gt.height, gt.width
        )));
    }
    let mut counts = vec![ClassCounts::default(); classes + 1];
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        let (p, g) = (p as usize, g as usize);
        if p > classes || g > classes {
            return Err(Error::ShapeMismatch(format!(
                "label {} outside 0..={classes}",
                p.max(g)
            )));
        }
        if p == g {
            counts[p].tp += 1;
        } else {
            counts[p].fp += 1;
            counts[g].fn_ += 1;
        }
    }
    Ok(Confusion::from_counts(
        counts
            .into_iter()
            .enumerate()
            .skip(1)
            .map(|(c, k)| (c as u16, k)),
    ))
}

fn class_mean(conf: &Confusion, per_class: impl Fn(&ClassCounts) -> Option<f64>) -> Result<f64> {
    let values: Vec<f64> = conf.classes.values().filter_map(per_class).collect();
    if values.is_empty() {
        return Err(Error::NoForeground);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn mean_iou(conf: &Confusion) -> Result<f64> {
    class_mean(conf, ClassCounts::iou)
}

pub fn dice(conf: &Confusion) -> Result<f64> {
    class_mean(conf, ClassCounts::dice)
}

/// Mean of foreground-IoU and background-IoU with all classes merged into
/// one foreground. A side whose union is empty counts as 1.
pub fn binary_iou(pred: &MaskMap, gt: &MaskMap) -> Result<f64> {
    if (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}×{} vs truth {}×{}",
            pred.height, pred.width, gt.height, gt.width
        )));
    }
    let (mut fg, mut bg) = (ClassCounts::default(), ClassCounts::default());
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        let (pf, gf) = (p != BACKGROUND, g != BACKGROUND);
        match (pf, gf) {
            (true, true) => fg.tp += 1,
            (false, false) => bg.tp += 1,
            (true, false) => {
                fg.fp += 1;
                bg.fn_ += 1;
            }
            (false, true) => {
                fg.fn_ += 1;
                bg.fp += 1;
            }
        }
    }
    Ok((fg.iou().unwrap_or(1.0) + bg.iou().unwrap_or(1.0)) / 2.0)
}

/// Mean and population standard deviation of per-run values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<f64>,
}

impl Summary {
    pub fn from_runs(runs: Vec<f64>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = runs.iter().sum::<f64>() / n;
        let var = runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            runs,
        }
    }
}

/// Accumulates one evaluation run.
#[derive(Debug, Clone, Default)]
pub struct RunAccumulator {
    pub query: Confusion,
    pub support: Confusion,
    binary_sum: f64,
    binary_count: usize,
    pub episodes: usize,
    pub degenerate_fusions: usize,
}

impl RunAccumulator {
    pub fn add_query(&mut self, conf: &Confusion, binary: f64) {
        self.query.merge(conf);
        self.binary_sum += binary;
        self.binary_count += 1;
    }

    pub fn add_support(&mut self, conf: &Confusion) {
        self.support.merge(conf);
    }

    pub fn binary_iou(&self) -> f64 {
        if self.binary_count == 0 {
            0.0
        } else {
            self.binary_sum / self.binary_count as f64
        }
    }

    /// Merges another run's accumulator; order of merging does not matter.
    pub fn merge(&mut self, other: &RunAccumulator) {
        self.query.merge(&other.query);
        self.support.merge(&other.support);
        self.binary_sum += other.binary_sum;
        self.binary_count += other.binary_count;
        self.episodes += other.episodes;
        self.degenerate_fusions += other.degenerate_fusions;
    }

    pub fn finish(&self) -> Result<RunMetrics> {
        Ok(RunMetrics {
            query_miou: mean_iou(&self.query)?,
            query_dice: dice(&self.query)?,
            binary_iou: self.binary_iou(),
            support_miou: mean_iou(&self.support)?,
            episodes: self.episodes,
            degenerate_fusions: self.degenerate_fusions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub query_miou: f64,
    pub query_dice: f64,
    pub binary_iou: f64,
    pub support_miou: f64,
    pub episodes: usize,
    pub degenerate_fusions: usize,
}

/// Metrics of one variant across several independently seeded runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: String,
    pub seeds: Vec<u64>,
    pub episodes_per_run: usize,
    pub query_miou: Summary,
    pub query_dice: Summary,
    pub binary_iou: Summary,
    pub support_miou: Summary,
    pub degenerate_fusions: usize,
    pub runs: Vec<RunMetrics>,
}

impl VariantReport {
    pub fn from_runs(variant: &str, seeds: Vec<u64>, runs: Vec<RunMetrics>) -> Result<Self> {
        if runs.is_empty() || runs.iter().any(|r| r.episodes == 0) {
            return Err(Error::Config("report needs at least one episode".into()));
        }
        let pick = |f: fn(&RunMetrics) -> f64| Summary::from_runs(runs.iter().map(f).collect());
        Ok(Self {
            variant: variant.to_string(),
            seeds,
            episodes_per_run: runs[0].episodes,
            query_miou: pick(|r| r.query_miou),
            query_dice: pick(|r| r.query_dice),
            binary_iou: pick(|r| r.binary_iou),
            support_miou: pick(|r| r.support_miou),
            degenerate_fusions: runs.iter().map(|r| r.degenerate_fusions).sum(),
            runs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub split: String,
    pub way: usize,
    pub shot: usize,
    pub variants: Vec<VariantReport>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per variant × metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,metric,mean,std,runs\n");
        for v in &self.variants {
            for (name, s) in [
                ("query_miou", &v.query_miou),
                ("query_dice", &v.query_dice),
                ("binary_iou", &v.binary_iou),
                ("support_miou", &v.support_miou),
            ] {
                let runs: Vec<String> = s.runs.iter().map(|r| format!("{r:.6}")).collect();
                out.push_str(&format!(
                    "{},{},{:.6},{:.6},{}\n",
                    v.variant,
                    name,
                    s.mean,
                    s.std,
                    runs.join(";")
                ));
            }
        }
        out
    }
}
