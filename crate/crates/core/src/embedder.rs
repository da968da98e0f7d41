//! Trainable pixel embedder with a two-level pyramid.
//!
//! Level 1 is a stack of pointwise linear layers with ReLU applied to the raw
//! pixel channels. Level 2 is level 1 average-pooled over 2×2 blocks and
//! upsampled back with nearest-neighbour lookup. The two levels are
//! concatenated channel-wise and projected to `dim` output channels by a
//! final pointwise linear layer without activation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{
    load_tensor_list, sample_episode, save_tensor_list, DatasetManifest, Episode, MaskMap, Split,
    BACKGROUND,
};
use crate::error::{Error, Result};
use crate::inference::{InferenceConfig, PreparedPrototypes};
use crate::loss::{image_loss_grad, total_loss, LossReport, LossWeights};
use crate::numerics::{concat_channels, nearest_source, upsample_nearest, Tensor};
use crate::prototype::{build_prototype_set, FeatureMap, SupportSet};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub in_channels: usize,
    pub hidden: usize,
    /// Number of ReLU layers producing level 1. Zero uses the raw pixels.
    pub hidden_layers: usize,
    /// Output feature width D.
    pub dim: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            hidden: 16,
            hidden_layers: 2,
            dim: 32,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.dim == 0 || (self.hidden_layers > 0 && self.hidden == 0) {
            return Err(Error::Config(format!(
                "embedder widths must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Pointwise linear layer, `weight` is `out × in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn init(inputs: usize, outputs: usize, rng: &mut SeededRng) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| rng.uniform_range(-a, a))
            .collect();
        Self {
            inputs,
            outputs,
            weight,
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], pixels: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(pixels * self.outputs);
        for row in x.chunks_exact(self.inputs) {
            for (w, b) in self.weight.chunks_exact(self.inputs).zip(&self.bias) {
                out.push(b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>());
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient.
    fn backward(&self, x: &[f64], dz: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; x.len()];
        for ((row, dzr), dxr) in x
            .chunks_exact(self.inputs)
            .zip(dz.chunks_exact(self.outputs))
            .zip(dx.chunks_exact_mut(self.inputs))
        {
            for (o, &g) in dzr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let w = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                let gw = &mut grad.weight[o * self.inputs..(o + 1) * self.inputs];
                for i in 0..self.inputs {
                    gw[i] += g * row[i];
                    dxr[i] += g * w[i];
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderParams {
    pub layers: Vec<Dense>,
    pub projection: Dense,
}

impl EmbedderParams {
    /// Seeded uniform initialization with bound sqrt(6 / (fan_in + fan_out))
    /// and zero biases.
    pub fn init(cfg: &EmbedderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SeededRng::new(seed);
        let mut layers = Vec::with_capacity(cfg.hidden_layers);
        let mut width = cfg.in_channels;
        for _ in 0..cfg.hidden_layers {
            layers.push(Dense::init(width, cfg.hidden, &mut rng));
            width = cfg.hidden;
        }
        let projection = Dense::init(2 * width, cfg.dim, &mut rng);
        Ok(Self { layers, projection })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
            projection: Dense::zeros(self.projection.inputs, self.projection.outputs),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.layers
            .first()
            .map_or(self.projection.inputs / 2, |l| l.inputs)
    }

    pub fn level_width(&self) -> usize {
        self.projection.inputs / 2
    }

    pub fn dim(&self) -> usize {
        self.projection.outputs
    }

    fn denses(&self) -> impl Iterator<Item = &Dense> {
        self.layers.iter().chain(std::iter::once(&self.projection))
    }

    fn denses_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.layers
            .iter_mut()
            .chain(std::iter::once(&mut self.projection))
    }

    pub fn parameter_count(&self) -> usize {
        self.denses().map(|d| d.weight.len() + d.bias.len()).sum()
    }

    /// All parameters in checkpoint order: per layer weight then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        for d in self.denses() {
            v.extend_from_slice(&d.weight);
            v.extend_from_slice(&d.bias);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.parameter_count()
            )));
        }
        let mut off = 0;
        for d in self.denses_mut() {
            let n = d.weight.len();
            d.weight.copy_from_slice(&flat[off..off + n]);
            off += n;
            let n = d.bias.len();
            d.bias.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn to_tensors(&self) -> Result<Vec<Tensor>> {
        let mut out = Vec::with_capacity(2 * (self.layers.len() + 1));
        for d in self.denses() {
            out.push(Tensor::new(vec![d.outputs, d.inputs], d.weight.clone())?);
            out.push(Tensor::new(vec![d.outputs], d.bias.clone())?);
        }
        Ok(out)
    }

    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        if tensors.len() < 2 || tensors.len() % 2 != 0 {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint holds {} tensors, expected weight/bias pairs",
                tensors.len()
            )));
        }
        let mut denses = Vec::with_capacity(tensors.len() / 2);
        for pair in tensors.chunks_exact(2) {
            let (w, b) = (&pair[0], &pair[1]);
            let [outputs, inputs] = *w.shape() else {
                return Err(Error::ShapeMismatch(format!(
                    "weight of shape {:?} is not a matrix",
                    w.shape()
                )));
            };
            if b.shape() != [outputs] {
                return Err(Error::ShapeMismatch(format!(
                    "bias of shape {:?} for {outputs} outputs",
                    b.shape()
                )));
            }
            denses.push(Dense {
                inputs,
                outputs,
                weight: w.data().to_vec(),
                bias: b.data().to_vec(),
            });
        }
        let projection = denses.pop().expect("at least one pair");
        for pair in denses.windows(2) {
            if pair[1].inputs != pair[0].outputs {
                return Err(Error::ShapeMismatch("hidden layer widths disagree".into()));
            }
        }
        let level = denses
            .last()
            .map(|d| d.outputs)
            .unwrap_or(projection.inputs / 2);
        if projection.inputs != 2 * level {
            return Err(Error::ShapeMismatch(format!(
                "projection takes {} inputs, pyramid provides {}",
                projection.inputs,
                2 * level
            )));
        }
        Ok(Self {
            layers: denses,
            projection,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_tensor_list(&self.to_tensors()?, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensors(&load_tensor_list(path)?)
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
struct ForwardCache {
    height: usize,
    width: usize,
    /// Inputs of each hidden layer, then the level-1 activations.
    activations: Vec<Vec<f64>>,
    concat: Vec<f64>,
    output: FeatureMap,
}

fn pooled_size(n: usize) -> usize {
    n.div_ceil(2)
}

/// 2×2 average pooling; blocks cut by an odd edge average what they hold.
fn avg_pool2(x: &[f64], h: usize, w: usize, d: usize) -> Result<Tensor> {
    let (ph, pw) = (pooled_size(h), pooled_size(w));
    let mut out = vec![0.0; ph * pw * d];
    let mut counts = vec![0usize; ph * pw];
    for y in 0..h {
        for x_ in 0..w {
            let b = (y / 2) * pw + x_ / 2;
            counts[b] += 1;
            let src = &x[(y * w + x_) * d..(y * w + x_ + 1) * d];
            for (o, v) in out[b * d..(b + 1) * d].iter_mut().zip(src) {
                *o += v;
            }
        }
    }
    for (b, &c) in counts.iter().enumerate() {
        for o in &mut out[b * d..(b + 1) * d] {
            *o /= c as f64;
        }
    }
    Tensor::new(vec![ph, pw, d], out)
}

fn forward(params: &EmbedderParams, image: &FeatureMap) -> Result<ForwardCache> {
    if image.channels() != params.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "image has {} channels, embedder expects {}",
            image.channels(),
            params.in_channels()
        )));
    }
    let (h, w) = (image.height(), image.width());
    let pixels = h * w;
    let mut activations = vec![image.data().to_vec()];
    for layer in &params.layers {
        let mut z = layer.forward(activations.last().expect("input present"), pixels);
        for v in &mut z {
            *v = v.max(0.0);
        }
        activations.push(z);
    }
    let level1 = activations.last().expect("level 1");
    let width = params.level_width();
    let level1 = Tensor::new(vec![h, w, width], level1.clone())?;
    let pooled = avg_pool2(level1.data(), h, w, width)?;
    let level2 = upsample_nearest(&pooled, h, w)?;
    let concat = concat_channels(&[&level1, &level2])?.into_data();
    let out = params.projection.forward(&concat, pixels);
    Ok(ForwardCache {
        height: h,
        width: w,
        activations,
        concat,
        output: FeatureMap::new(h, w, params.dim(), out)?,
    })
}

fn backward_image(
    params: &EmbedderParams,
    cache: &ForwardCache,
    d_out: &[f64],
    grad: &mut EmbedderParams,
) {
    let (h, w) = (cache.height, cache.width);
    let width = params.level_width();
    let d_concat = params
        .projection
        .backward(&cache.concat, d_out, &mut grad.projection);

    // Split the concatenation; the level-2 half flows back through the
    // upsampling (scatter-add) and the pooling (spread over each block).
    let (ph, pw) = (pooled_size(h), pooled_size(w));
    let mut d_level1 = vec![0.0; h * w * width];
    let mut d_pooled = vec![0.0; ph * pw * width];
    for y in 0..h {
        let sy = nearest_source(y, ph, h);
        for x in 0..w {
            let sx = nearest_source(x, pw, w);
            let p = y * w + x;
            let row = &d_concat[p * 2 * width..(p + 1) * 2 * width];
            d_level1[p * width..(p + 1) * width].copy_from_slice(&row[..width]);
            let b = sy * pw + sx;
            for (o, g) in d_pooled[b * width..(b + 1) * width]
                .iter_mut()
                .zip(&row[width..])
            {
                *o += g;
            }
        }
    }
    for y in 0..h {
        let bh = (h - (y / 2) * 2).min(2);
        for x in 0..w {
            let bw = (w - (x / 2) * 2).min(2);
            let count = (bh * bw) as f64;
            let b = (y / 2) * pw + x / 2;
            let p = y * w + x;
            for (o, g) in d_level1[p * width..(p + 1) * width]
                .iter_mut()
                .zip(&d_pooled[b * width..(b + 1) * width])
            {
                *o += g / count;
            }
        }
    }

    let mut d = d_level1;
    for (i, layer) in params.layers.iter().enumerate().rev() {
        let post = &cache.activations[i + 1];
        for (g, &a) in d.iter_mut().zip(post) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }
        d = layer.backward(&cache.activations[i], &d, &mut grad.layers[i]);
    }
}

/// Embeds an H×W×channels raster into an H×W×D feature map.
pub fn embed(params: &EmbedderParams, image: &FeatureMap) -> Result<FeatureMap> {
    Ok(forward(params, image)?.output)
}

/// Adds to `feature_grads` the gradient flowing from the prototype gradients
/// back through masked average pooling.
fn pooling_backward(
    support: &SupportSet,
    proto_grads: &[Vec<f64>],
    feature_grads: &mut [Vec<Vec<f64>>],
) {
    let d = support.dim();
    let mut spread = |label: u16, members: &[(usize, usize)], g: &[f64]| {
        let contributing: Vec<(usize, usize, usize)> = members
            .iter()
            .filter_map(|&(c, k)| {
                let n = support.masks()[c][k].count(label);
                (n > 0).then_some((c, k, n))
            })
            .collect();
        let shots = contributing.len() as f64;
        for (c, k, n) in contributing {
            let scale = 1.0 / (shots * n as f64);
            let mask = &support.masks()[c][k];
            let out = &mut feature_grads[c][k];
            for (p, &l) in mask.labels.iter().enumerate() {
                if l == label {
                    for (o, v) in out[p * d..(p + 1) * d].iter_mut().zip(g) {
                        *o += scale * v;
                    }
                }
            }
        }
    };
    let all: Vec<(usize, usize)> = support
        .features()
        .iter()
        .enumerate()
        .flat_map(|(c, fs)| (0..fs.len()).map(move |k| (c, k)))
        .collect();
    spread(BACKGROUND, &all, &proto_grads[0]);
    for (c, fs) in support.features().iter().enumerate() {
        let members: Vec<(usize, usize)> = (0..fs.len()).map(|k| (c, k)).collect();
        spread((c + 1) as u16, &members, &proto_grads[c + 1]);
    }
}

struct EpisodeForward {
    support_caches: Vec<Vec<ForwardCache>>,
    query_caches: Vec<ForwardCache>,
    support: SupportSet,
}

fn forward_episode(params: &EmbedderParams, episode: &Episode) -> Result<EpisodeForward> {
    let support_caches = episode
        .support
        .iter()
        .map(|shots| {
            shots
                .iter()
                .map(|s| forward(params, &s.image))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let query_caches = episode
        .query
        .iter()
        .map(|s| forward(params, &s.image))
        .collect::<Result<Vec<_>>>()?;
    let features = support_caches
        .iter()
        .map(|g| g.iter().map(|c| c.output.clone()).collect())
        .collect();
    let masks: Vec<Vec<MaskMap>> = episode
        .support
        .iter()
        .map(|g| g.iter().map(|s| s.mask.clone()).collect())
        .collect();
    Ok(EpisodeForward {
        support_caches,
        query_caches,
        support: SupportSet::new(features, masks)?,
    })
}

fn episode_pass(
    params: &EmbedderParams,
    episode: &Episode,
    cfg: &InferenceConfig,
    weights: &LossWeights,
    grad: Option<&mut EmbedderParams>,
) -> Result<LossReport> {
    cfg.validate()?;
    weights.validate()?;
    let fw = forward_episode(params, episode)?;
    let protos = build_prototype_set(&fw.support)?;
    let prepared = PreparedPrototypes::new(cfg.metric, &protos)?;
    let want = grad.is_some();
    let d = protos.dim();

    let n_sup = fw.support.image_count() as f64;
    let n_que = episode.query.len() as f64;
    let mut proto_grads = vec![vec![0.0; d]; protos.len()];
    let mut support_grads: Vec<Vec<Vec<f64>>> = fw
        .support
        .features()
        .iter()
        .map(|g| g.iter().map(|f| vec![0.0; f.data().len()]).collect())
        .collect();

    let mut l_sup = 0.0;
    for (c, (fs, ms)) in fw
        .support
        .features()
        .iter()
        .zip(fw.support.masks())
        .enumerate()
    {
        for (k, (f, m)) in fs.iter().zip(ms).enumerate() {
            l_sup += image_loss_grad(
                f,
                m,
                &prepared,
                cfg.alpha,
                weights.w_s / n_sup,
                want.then_some(support_grads[c][k].as_mut_slice()),
                want.then_some(proto_grads.as_mut_slice()),
            )?;
        }
    }
    l_sup /= n_sup;

    let mut l_que = 0.0;
    let mut query_grads: Vec<Vec<f64>> = Vec::with_capacity(episode.query.len());
    for (cache, s) in fw.query_caches.iter().zip(&episode.query) {
        let mut fg = vec![0.0; if want { cache.output.data().len() } else { 0 }];
        l_que += image_loss_grad(
            &cache.output,
            &s.mask,
            &prepared,
            cfg.alpha,
            weights.w_q / n_que,
            want.then_some(fg.as_mut_slice()),
            want.then_some(proto_grads.as_mut_slice()),
        )?;
        query_grads.push(fg);
    }
    l_que /= n_que;

    if let Some(grad) = grad {
        pooling_backward(&fw.support, &proto_grads, &mut support_grads);
        for (caches, grads) in fw.support_caches.iter().zip(&support_grads) {
            for (cache, g) in caches.iter().zip(grads) {
                backward_image(params, cache, g, grad);
            }
        }
        for (cache, g) in fw.query_caches.iter().zip(&query_grads) {
            backward_image(params, cache, g, grad);
        }
    }

    Ok(LossReport {
        l_que,
        l_sup,
        total: total_loss(l_sup, l_que, weights),
        pixel_count: fw.support.features()[0][0].pixel_count(),
    })
}

/// Loss of one episode without gradients.
pub fn episode_loss(
    params: &EmbedderParams,
    episode: &Episode,
    cfg: &InferenceConfig,
    weights: &LossWeights,
) -> Result<LossReport> {
    episode_pass(params, episode, cfg, weights, None)
}

/// Gradient of `w_s·L_sup + w_q·L_que` with respect to every embedder
/// parameter. Support features receive gradient both directly and through
/// the prototypes they pool into.
pub fn backward(
    params: &EmbedderParams,
    episode: &Episode,
    cfg: &InferenceConfig,
    weights: &LossWeights,
) -> Result<(EmbedderParams, LossReport)> {
    let mut grad = params.zeros_like();
    let report = episode_pass(params, episode, cfg, weights, Some(&mut grad))?;
    Ok((grad, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Factor applied to the learning rate at each milestone.
    pub lr_decay: f64,
    pub milestones: Vec<usize>,
    pub iterations: usize,
    pub weights: LossWeights,
    pub seed: u64,
    pub way: usize,
    pub shot: usize,
    pub queries: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 0.0005,
            lr_decay: 0.1,
            milestones: vec![200],
            iterations: 300,
            weights: LossWeights::default(),
            seed: 0,
            way: 1,
            shot: 1,
            queries: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.lr_decay > 0.0) {
            return Err(Error::Config(
                "weight decay must be >= 0 and lr decay > 0".into(),
            ));
        }
        if self.way == 0 || self.shot == 0 || self.queries == 0 {
            return Err(Error::Config("episode needs C, K, N_q >= 1".into()));
        }
        self.weights.validate()
    }

    /// Learning rate in effect at `iteration` (0-based).
    pub fn lr_at(&self, iteration: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| iteration >= m).count();
        self.lr * self.lr_decay.powi(passed as i32)
    }
}

/// Momentum buffers, one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub velocity: Vec<f64>,
}

impl SgdState {
    pub fn new(params: &EmbedderParams) -> Self {
        Self {
            velocity: vec![0.0; params.parameter_count()],
        }
    }
}

/// One momentum step: `v ← m·v + g + wd·θ`, `θ ← θ − lr·v`.
pub fn sgd_step(
    params: &mut EmbedderParams,
    grads: &EmbedderParams,
    state: &mut SgdState,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    let g = grads.to_flat();
    let mut theta = params.to_flat();
    if g.len() != theta.len() || state.velocity.len() != theta.len() {
        return Err(Error::ShapeMismatch(
            "gradient, parameters and momentum differ in size".into(),
        ));
    }
    for ((t, v), gi) in theta.iter_mut().zip(&mut state.velocity).zip(&g) {
        *v = momentum * *v + gi + weight_decay * *t;
        *t -= lr * *v;
    }
    params.set_flat(&theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub iteration: usize,
    pub lr: f64,
    pub l_sup: f64,
    pub l_que: f64,
    pub total: f64,
}

pub fn train_log_csv(log: &[TrainLogEntry]) -> String {
    let mut s = String::from("iteration,lr,l_sup,l_que,total\n");
    for e in log {
        s.push_str(&format!(
            "{},{:e},{:.12e},{:.12e},{:.12e}\n",
            e.iteration, e.lr, e.l_sup, e.l_que, e.total
        ));
    }
    s
}

/// Seed of the episode drawn at `iteration`.
pub fn training_episode_seed(seed: u64, iteration: usize) -> u64 {
    SeededRng::derive(seed, iteration as u64).next_u64()
}

/// Trains `init` on episodes from the seen split, one episode per step.
pub fn train(
    manifest: &DatasetManifest,
    init: EmbedderParams,
    cfg: &TrainConfig,
    cfg_inf: &InferenceConfig,
) -> Result<(EmbedderParams, Vec<TrainLogEntry>)> {
    cfg.validate()?;
    cfg_inf.validate()?;
    let mut params = init;
    let mut state = SgdState::new(&params);
    let mut log = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let episode = sample_episode(
            manifest,
            Split::Seen,
            cfg.way,
            cfg.shot,
            cfg.queries,
            training_episode_seed(cfg.seed, it),
        )?;
        let (grads, report) = backward(&params, &episode, cfg_inf, &cfg.weights)?;
        let lr = cfg.lr_at(it);
        sgd_step(
            &mut params,
            &grads,
            &mut state,
            lr,
            cfg.momentum,
            cfg.weight_decay,
        )?;
        log.push(TrainLogEntry {
            iteration: it,
            lr,
            l_sup: report.l_sup,
            l_que: report.l_que,
            total: report.total,
        });
    }
    Ok((params, log))
}
