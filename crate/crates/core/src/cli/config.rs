//! Run configuration: one JSON document, overridable from the command line.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::data::SyntheticConfig;
use crate::embedder::{EmbedderConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::inference::{InferenceConfig, MetricKind};
use crate::iqi::IqiConfig;
use crate::loss::LossWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
pub enum Variant {
    #[serde(rename = "cos")]
    Cos,
    #[serde(rename = "f")]
    F,
    #[serde(rename = "f-srp")]
    FSrp,
    #[serde(rename = "f-iqi")]
    FIqi,
    #[serde(rename = "f-srp-iqi")]
    FSrpIqi,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Cos,
        Variant::F,
        Variant::FSrp,
        Variant::FIqi,
        Variant::FSrpIqi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cos => "cos",
            Variant::F => "f",
            Variant::FSrp => "f-srp",
            Variant::FIqi => "f-iqi",
            Variant::FSrpIqi => "f-srp-iqi",
        }
    }

    /// Row label in the ablation table.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Cos => "Cos",
            Variant::F => "F",
            Variant::FSrp => "F+SRP",
            Variant::FIqi => "F+IQI",
            Variant::FSrpIqi => "F+SRP+IQI",
        }
    }

    pub fn metric(self) -> MetricKind {
        match self {
            Variant::Cos => MetricKind::Cosine,
            _ => MetricKind::Fidelity,
        }
    }

    pub fn uses_srp(self) -> bool {
        matches!(self, Variant::FSrp | Variant::FSrpIqi)
    }

    pub fn uses_iqi(self) -> bool {
        matches!(self, Variant::FIqi | Variant::FSrpIqi)
    }

    /// The variant whose trained model this variant evaluates. Refinement
    /// happens at inference time only, so IQI variants share weights with
    /// their non-IQI counterpart.
    pub fn training_variant(self) -> Variant {
        match self {
            Variant::FIqi => Variant::F,
            Variant::FSrpIqi => Variant::FSrp,
            v => v,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeShape {
    pub way: usize,
    pub shot: usize,
    pub queries: usize,
}

impl Default for EpisodeShape {
    fn default() -> Self {
        Self {
            way: 1,
            shot: 1,
            queries: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub runs: usize,
    pub episodes: usize,
    /// Run `r` uses seed `seed + r`.
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            runs: 5,
            episodes: 200,
            seed: 1000,
        }
    }
}

impl EvalProtocol {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
    pub masks: PathBuf,
    pub variant: Variant,
    pub synthetic: SyntheticConfig,
    pub embedder: EmbedderConfig,
    /// Shape of training and evaluation episodes.
    pub episode: EpisodeShape,
    /// `metric` is replaced by the variant's metric when resolved.
    pub inference: InferenceConfig,
    /// `num_prototypes` applies to IQI variants only.
    pub iqi: IqiConfig,
    /// `weights.w_s` applies to SRP variants only; others train with 0.
    pub train: TrainConfig,
    pub eval: EvalProtocol,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            checkpoints: PathBuf::from("checkpoints"),
            reports: PathBuf::from("reports"),
            masks: PathBuf::from("masks"),
            variant: Variant::FSrpIqi,
            synthetic: SyntheticConfig::default(),
            embedder: EmbedderConfig::default(),
            episode: EpisodeShape::default(),
            inference: InferenceConfig::default(),
            iqi: IqiConfig::default(),
            train: TrainConfig::default(),
            eval: EvalProtocol::default(),
        }
    }
}

/// Settings a variant actually runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub variant: Variant,
    pub inference: InferenceConfig,
    pub iqi: IqiConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.embedder.validate()?;
        self.inference.validate()?;
        self.iqi.validate()?;
        self.train.validate()?;
        let e = &self.episode;
        if e.way == 0 || e.shot == 0 || e.queries == 0 {
            return Err(Error::Config("episode needs C, K, N_q >= 1".into()));
        }
        if self.eval.runs == 0 || self.eval.episodes == 0 {
            return Err(Error::Config("evaluation needs runs, episodes >= 1".into()));
        }
        if self.embedder.in_channels != 3 {
            return Err(Error::Config(
                "synthetic images have 3 channels; embedder.in_channels must be 3".into(),
            ));
        }
        Ok(())
    }

    /// Applies the variant's metric, loss weight and refinement settings.
    pub fn resolve(&self, variant: Variant) -> Result<Resolved> {
        self.validate()?;
        let mut train = self.train.clone();
        train.way = self.episode.way;
        train.shot = self.episode.shot;
        train.queries = self.episode.queries;
        if variant.uses_srp() {
            if train.weights.w_s <= 0.0 {
                return Err(Error::Config(format!(
                    "variant {variant} needs train.weights.w_s > 0"
                )));
            }
        } else {
            train.weights = LossWeights::new(0.0, train.weights.w_q)?;
        }
        let iqi = if variant.uses_iqi() {
            self.iqi
        } else {
            IqiConfig {
                num_prototypes: 1,
                ..self.iqi
            }
        };
        Ok(Resolved {
            variant,
            inference: InferenceConfig::new(variant.metric(), self.inference.alpha)?,
            iqi,
            train,
        })
    }

    /// IQI variants map to the checkpoint of the model they are trained as.
    pub fn checkpoint_path(&self, variant: Variant) -> PathBuf {
        let v = variant.training_variant();
        self.checkpoints.join(format!("{}.pseg", v.name()))
    }

    pub fn train_log_path(&self, variant: Variant) -> PathBuf {
        let v = variant.training_variant();
        self.checkpoints.join(format!("{}.train.csv", v.name()))
    }
}
