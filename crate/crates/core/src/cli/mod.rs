//! Command-line front end.

pub mod config;
pub mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{
    generate_synthetic_dataset, sample_episode, save_mask, DatasetManifest, MANIFEST_FILE,
    Split,
};
use crate::embedder::{train, train_log_csv, EmbedderParams};
use crate::error::{Error, Result};
use crate::eval::{RunMetrics, RunReport, VariantReport};
use crate::loss::LossWeights;

use config::{Resolved, RunConfig, Variant};
use pipeline::{evaluate, evaluate_run, predict_episode, EpisodeMasks};

#[derive(Debug, Parser)]
#[command(name = "protoseg", version, about = "Few-shot segmentation with prototype networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the synthetic shape dataset and write its manifest.
    GenData(Common),
    /// Train the embedder of one variant on seen-class episodes.
    Train(Common),
    /// Evaluate one variant on unseen-class episodes.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate (default: <checkpoints>/<variant>.pseg).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write predicted and true query masks to the mask directory.
        #[arg(long)]
        dump_masks: bool,
    },
    /// Run a single unseen-class episode and print its metrics.
    Episode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Episode seed.
        #[arg(long, default_value_t = 0)]
        episode_seed: u64,
        #[arg(long)]
        dump_masks: bool,
    },
    /// Train and evaluate all five variants and print the comparison table.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Reuse existing checkpoints instead of retraining.
        #[arg(long)]
        reuse: bool,
    },
}

/// Config file and overrides shared by all subcommands. Flags win over the
/// file, the file wins over built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory holding manifest.json.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    #[arg(long)]
    pub reports: Option<PathBuf>,
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    /// Sets the dataset, training and evaluation seeds at once.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub way: Option<usize>,
    #[arg(long)]
    pub shot: Option<usize>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Number of IQI prototype iterates.
    #[arg(long)]
    pub num_prototypes: Option<usize>,
    #[arg(long)]
    pub w_s: Option<f64>,
    #[arg(long)]
    pub w_q: Option<f64>,
    /// Output feature width.
    #[arg(long)]
    pub dim: Option<usize>,
}

impl Common {
    pub fn build_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(cfg.dataset, self.dataset);
        set!(cfg.checkpoints, self.checkpoints);
        set!(cfg.reports, self.reports);
        set!(cfg.masks, self.masks);
        set!(cfg.variant, self.variant);
        if let Some(seed) = self.seed {
            cfg.synthetic.seed = seed;
            cfg.train.seed = seed;
            cfg.eval.seed = seed;
        }
        set!(cfg.train.iterations, self.iterations);
        set!(cfg.train.lr, self.lr);
        set!(cfg.episode.way, self.way);
        set!(cfg.episode.shot, self.shot);
        set!(cfg.episode.queries, self.queries);
        set!(cfg.eval.runs, self.runs);
        set!(cfg.eval.episodes, self.episodes);
        set!(cfg.inference.alpha, self.alpha);
        set!(cfg.iqi.eta, self.eta);
        set!(cfg.iqi.num_prototypes, self.num_prototypes);
        if self.w_s.is_some() || self.w_q.is_some() {
            cfg.train.weights = LossWeights {
                w_s: self.w_s.unwrap_or(cfg.train.weights.w_s),
                w_q: self.w_q.unwrap_or(cfg.train.weights.w_q),
            };
        }
        set!(cfg.embedder.dim, self.dim);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            create_dir(parent)?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn cmd_gen_data(cfg: &RunConfig) -> Result<DatasetManifest> {
    let manifest = generate_synthetic_dataset(&cfg.synthetic, &cfg.dataset)?;
    let hash = manifest.content_hash()?;
    println!(
        "wrote {} ({} items, seen {:?}, unseen {:?})",
        cfg.dataset.join(MANIFEST_FILE).display(),
        manifest.items.len(),
        manifest.seen,
        manifest.unseen
    );
    println!("sha256 {hash}");
    Ok(manifest)
}

/// Trains the model `variant` evaluates with and writes its checkpoint and
/// loss log.
pub fn train_variant(
    cfg: &RunConfig,
    manifest: &DatasetManifest,
    variant: Variant,
) -> Result<EmbedderParams> {
    let r = cfg.resolve(variant)?;
    let init = EmbedderParams::init(&cfg.embedder, r.train.seed)?;
    let (params, log) = train(manifest, init, &r.train, &r.inference)?;
    let path = cfg.checkpoint_path(variant);
    create_dir(&cfg.checkpoints)?;
    params.save(&path)?;
    write_file(&cfg.train_log_path(variant), train_log_csv(&log))?;
    match log.last() {
        Some(last) => println!(
            "{variant}: {} iterations, final loss {:.6} (sup {:.6}, que {:.6}) -> {}",
            log.len(),
            last.total,
            last.l_sup,
            last.l_que,
            path.display()
        ),
        None => println!("{variant}: 0 iterations -> {}", path.display()),
    }
    Ok(params)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<EmbedderParams> {
    let manifest = DatasetManifest::load(&cfg.dataset)?;
    train_variant(cfg, &manifest, cfg.variant)
}

fn dump_masks(dir: &Path, variant: Variant, run: usize, masks: &[EpisodeMasks]) -> Result<()> {
    create_dir(dir)?;
    for em in masks {
        for (q, (p, t)) in em.predicted.iter().zip(&em.truth).enumerate() {
            let stem = format!("{variant}_r{run}_e{:04}_q{q}", em.episode);
            save_mask(p, dir.join(format!("{stem}_pred.pseg")))?;
            save_mask(t, dir.join(format!("{stem}_gt.pseg")))?;
        }
    }
    Ok(())
}

fn evaluate_variant(
    cfg: &RunConfig,
    manifest: &DatasetManifest,
    params: &EmbedderParams,
    r: &Resolved,
    keep_masks: bool,
) -> Result<VariantReport> {
    let seeds = cfg.eval.seeds();
    let results = evaluate(
        manifest,
        params,
        &r.inference,
        &r.iqi,
        cfg.episode,
        &seeds,
        cfg.eval.episodes,
        keep_masks,
    )?;
    let mut runs = Vec::with_capacity(results.len());
    for (i, (metrics, masks)) in results.into_iter().enumerate() {
        if keep_masks {
            dump_masks(&cfg.masks, r.variant, i, &masks)?;
        }
        runs.push(metrics);
    }
    VariantReport::from_runs(r.variant.name(), seeds, runs)
}

fn report_header(cfg: &RunConfig, variants: Vec<VariantReport>) -> RunReport {
    RunReport {
        split: "unseen".into(),
        way: cfg.episode.way,
        shot: cfg.episode.shot,
        variants,
    }
}

fn write_report(cfg: &RunConfig, report: &RunReport) -> Result<()> {
    write_file(&cfg.reports.join("run.json"), report.to_json())?;
    write_file(&cfg.reports.join("run.csv"), report.to_csv())
}

fn print_variant(v: &VariantReport) {
    println!(
        "{:<10} query mIoU {:.4} ± {:.4}  dice {:.4}  binary {:.4}  support mIoU {:.4} ± {:.4}",
        v.variant,
        v.query_miou.mean,
        v.query_miou.std,
        v.query_dice.mean,
        v.binary_iou.mean,
        v.support_miou.mean,
        v.support_miou.std
    );
    if v.degenerate_fusions > 0 {
        println!(
            "warning: {} episodes had zero support IoU for every prototype iterate",
            v.degenerate_fusions
        );
    }
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, dump: bool) -> Result<RunReport> {
    let manifest = DatasetManifest::load(&cfg.dataset)?;
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.checkpoint_path(cfg.variant));
    let params = EmbedderParams::load(&path)?;
    let r = cfg.resolve(cfg.variant)?;
    let v = evaluate_variant(cfg, &manifest, &params, &r, dump)?;
    print_variant(&v);
    let report = report_header(cfg, vec![v]);
    write_report(cfg, &report)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct EpisodeSummary {
    variant: String,
    seed: u64,
    class_ids: Vec<u16>,
    support_items: Vec<Vec<usize>>,
    query_miou: Option<f64>,
    support_miou: Option<f64>,
    binary_iou: f64,
    rhos: Vec<f64>,
    degenerate: bool,
}

pub fn cmd_episode(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    seed: u64,
    dump: bool,
) -> Result<()> {
    let manifest = DatasetManifest::load(&cfg.dataset)?;
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.checkpoint_path(cfg.variant));
    let params = EmbedderParams::load(&path)?;
    let r = cfg.resolve(cfg.variant)?;
    let e = &cfg.episode;
    let episode = sample_episode(&manifest, Split::Unseen, e.way, e.shot, e.queries, seed)?;
    let support_items = episode
        .support
        .iter()
        .map(|g| g.iter().map(|s| s.item).collect())
        .collect();
    let (inputs, truth) = episode.split_truth();
    let pred = predict_episode(&params, &inputs, &r.inference, &r.iqi)?;
    let mut acc = crate::eval::RunAccumulator::default();
    pipeline::score_episode(&inputs, &pred, &truth, &mut acc)?;
    let summary = EpisodeSummary {
        variant: r.variant.name().into(),
        seed,
        class_ids: inputs.class_ids.clone(),
        support_items,
        query_miou: crate::eval::mean_iou(&acc.query).ok(),
        support_miou: crate::eval::mean_iou(&acc.support).ok(),
        binary_iou: acc.binary_iou(),
        rhos: pred.rhos.clone(),
        degenerate: pred.degenerate,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    if dump {
        let masks = EpisodeMasks {
            episode: 0,
            predicted: pred.query,
            truth: truth.masks,
        };
        dump_masks(&cfg.masks, r.variant, 0, &[masks])?;
    }
    Ok(())
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub miou: f64,
    pub std: f64,
}

pub fn ablation_rows(report: &RunReport) -> Vec<AblationRow> {
    let find = |v: Variant| report.variants.iter().find(|r| r.variant == v.name());
    let mut rows = Vec::new();
    for v in Variant::ALL {
        if let Some(r) = find(v) {
            rows.push(AblationRow {
                label: v.label().into(),
                miou: r.query_miou.mean,
                std: r.query_miou.std,
            });
        }
    }
    for v in [Variant::F, Variant::FSrp] {
        if let Some(r) = find(v) {
            rows.push(AblationRow {
                label: format!("{} (sup)", v.label()),
                miou: r.support_miou.mean,
                std: r.support_miou.std,
            });
        }
    }
    rows
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::from("method,miou,std\n");
    for r in rows {
        s.push_str(&format!("{},{:.2},{:.2}\n", r.label, 100.0 * r.miou, 100.0 * r.std));
    }
    s
}

/// Runs the five-variant comparison. Each evaluation run is a full
/// replicate: run `r` trains the three distinct models (cos, f, f-srp) from
/// seed `train.seed + r` and evaluates all five variants on the episodes of
/// seed `eval.seed + r`. IQI variants reuse the model of their non-IQI
/// counterpart. A variant that fails is reported and left out of the table;
/// the command then fails.
pub fn cmd_ablate(cfg: &RunConfig, reuse: bool) -> Result<RunReport> {
    let manifest = DatasetManifest::load(&cfg.dataset)?;
    let resolved = Variant::ALL
        .iter()
        .map(|&v| cfg.resolve(v))
        .collect::<Result<Vec<_>>>()?;
    create_dir(&cfg.checkpoints)?;
    let eval_seeds = cfg.eval.seeds();
    let per_run: Vec<Result<Vec<Result<RunMetrics>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = eval_seeds
            .iter()
            .enumerate()
            .map(|(run, &eval_seed)| {
                let manifest = &manifest;
                let resolved = &resolved;
                scope.spawn(move || ablate_run(cfg, manifest, resolved, run, eval_seed, reuse))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ablation thread panicked"))
            .collect()
    });
    let per_run = per_run.into_iter().collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<Vec<Result<RunMetrics>>> = Variant::ALL.iter().map(|_| Vec::new()).collect();
    for run in per_run {
        for (column, m) in columns.iter_mut().zip(run) {
            column.push(m);
        }
    }
    let mut reports = Vec::new();
    let mut failure = None;
    for (v, column) in Variant::ALL.into_iter().zip(columns) {
        let runs: Result<Vec<RunMetrics>> = column.into_iter().collect();
        match runs.and_then(|runs| VariantReport::from_runs(v.name(), eval_seeds.clone(), runs)) {
            Ok(rep) => {
                print_variant(&rep);
                reports.push(rep);
            }
            Err(e) => {
                eprintln!("{v}: failed: {e}");
                failure.get_or_insert(e);
            }
        }
    }
    let report = report_header(cfg, reports);
    write_report(cfg, &report)?;
    let table = ablation_table(&ablation_rows(&report));
    write_file(&cfg.reports.join("ablation.csv"), &table)?;
    print!("{table}");
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn ablate_run(
    cfg: &RunConfig,
    manifest: &DatasetManifest,
    resolved: &[Resolved],
    run: usize,
    eval_seed: u64,
    reuse: bool,
) -> Result<Vec<Result<RunMetrics>>> {
    let mut models = Vec::new();
    for r in resolved.iter().filter(|r| r.variant.training_variant() == r.variant) {
        let mut train_cfg = r.train.clone();
        train_cfg.seed = train_cfg.seed.wrapping_add(run as u64);
        let path = cfg.checkpoints.join(format!("{}.run{run}.pseg", r.variant));
        let params = if reuse && path.exists() {
            EmbedderParams::load(&path)?
        } else {
            let init = EmbedderParams::init(&cfg.embedder, train_cfg.seed)?;
            let (params, log) = train(manifest, init, &train_cfg, &r.inference)?;
            params.save(&path)?;
            let log_path = cfg.checkpoints.join(format!("{}.run{run}.train.csv", r.variant));
            write_file(&log_path, train_log_csv(&log))?;
            params
        };
        models.push((r.variant, params));
    }
    Ok(resolved
        .iter()
        .map(|r| {
            let params = &models
                .iter()
                .find(|(m, _)| *m == r.variant.training_variant())
                .expect("model trained")
                .1;
            evaluate_run(
                manifest,
                params,
                &r.inference,
                &r.iqi,
                cfg.episode,
                eval_seed,
                cfg.eval.episodes,
                false,
            )
            .map(|(m, _)| m)
        })
        .collect())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(c) => cmd_gen_data(&c.build_config()?).map(drop),
        Command::Train(c) => cmd_train(&c.build_config()?).map(drop),
        Command::Eval {
            common,
            checkpoint,
            dump_masks,
        } => cmd_eval(&common.build_config()?, checkpoint.as_deref(), dump_masks).map(drop),
        Command::Episode {
            common,
            checkpoint,
            episode_seed,
            dump_masks,
        } => cmd_episode(
            &common.build_config()?,
            checkpoint.as_deref(),
            episode_seed,
            dump_masks,
        ),
        Command::Ablate { common, reuse } => cmd_ablate(&common.build_config()?, reuse).map(drop),
    }
}
