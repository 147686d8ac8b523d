//! The `cellpk` command-line surface.
//!
//! Subcommands chain into the full workflow: `synth` makes a labelled
//! dataset, `augment` expands it by lossless rotations, `train` fits one of
//! the built-in models, `session` adds 30 fresh rotations and retrains,
//! `fuse` joins two trained models, `predict` scores a manifest,
//! `evaluate`/`ttest` compute the statistics, and `visualize` extracts
//! filter heatmaps.
//!
//! Every subcommand is deterministic under a fixed `--seed` and logs its
//! fully-resolved configuration to stderr. Exit codes: 0 success, 1 usage
//! error, 2 data error, 3 internal error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::augment::{full_rotation_angles, sample_session_angles, RotationAngle, ANGLES_PER_SESSION};
use crate::config::{render_train_config, RunConfig};
use crate::metric::{self, TTestVariant};
use crate::models::{self, ModelKind};
use crate::nn::{self, ModelGraph, TrainConfig};
use crate::pipeline::{self, Manifest, ManifestDataset, ManifestSchema};
use crate::seeds;
use crate::viz;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error_from!(
    crate::pipeline::PipelineError,
    crate::imgio::ImgError,
    crate::augment::AugmentError,
    crate::metric::MetricError,
    crate::nn::NnError,
    crate::viz::VizError,
    crate::config::ConfigError
);

#[derive(Parser, Debug)]
#[command(
    name = "cellpk",
    version,
    about = "Lossless rotation augmentation, model fusion, and PK evaluation for patch regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentMode {
    /// The four exact permutations 0/90/180/270.
    Baseline,
    /// The full 1..=360 sweep (360 wraps to the identity).
    Full360,
    /// 30 fresh ledger-tracked angles.
    Session,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Welch,
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    TinyShallow,
    TinyDeep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Deep,
    Shallow,
    Combined,
}

impl PresetArg {
    fn name(self) -> &'static str {
        match self {
            PresetArg::Deep => "deep",
            PresetArg::Shallow => "shallow",
            PresetArg::Combined => "combined",
        }
    }
}

#[derive(Args, Debug)]
pub struct CommonTrainArgs {
    /// Flat key=value config file; CLI flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training resolution; larger images are area-downscaled to this side.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a deterministic synthetic patch dataset with exact labels.
    Synth {
        /// Number of images.
        #[arg(long)]
        n: usize,
        /// Square image side in pixels.
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (images plus manifest.csv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand a manifest by lossless rotations.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: AugmentMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Angle ledger file (required for --mode session).
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Output directory (rotated images plus manifest.csv).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; output files are identical for any count.
        #[arg(long)]
        workers: Option<usize>,
        /// Read the manifest in the slide,rid,y layout.
        #[arg(long)]
        breastpathq: bool,
    },
    /// Train a built-in model with a named preset.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, value_enum)]
        preset: PresetArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output weight file (CPKW1).
        #[arg(long)]
        out: PathBuf,
        /// Optional per-epoch CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        breastpathq: bool,
        #[command(flatten)]
        common: CommonTrainArgs,
    },
    /// Run one cumulative rotation-training session.
    Session {
        /// Session state file.
        #[arg(long)]
        state: PathBuf,
        /// Base manifest of unaugmented training sources.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        preset: PresetArg,
        /// Create a fresh session chain instead of running one.
        #[arg(long)]
        init: bool,
        /// Model kind stored in the state file (with --init).
        #[arg(long)]
        model: Option<ModelArg>,
        /// Baseline-trained weights the chain resumes from (with --init).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Held-out validation manifest (with --init).
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for rotations, weights, ledger (with --init).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        breastpathq: bool,
        #[command(flatten)]
        common: CommonTrainArgs,
    },
    /// Fuse two trained models into a parallel architecture.
    Fuse {
        /// Weight file of branch A.
        #[arg(long)]
        a: PathBuf,
        /// Weight file of branch B.
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Fine-tune the fused model after surgery.
        #[arg(long)]
        finetune: bool,
        /// Training manifest (required with --finetune).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Preset for fine-tuning (defaults to combined).
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long)]
        breastpathq: bool,
        #[command(flatten)]
        common: CommonTrainArgs,
    },
    /// Score every manifest row with a trained model.
    Predict {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Output CSV (id,prediction).
        #[arg(long)]
        out: PathBuf,
        /// Input resolution override (inferred from the weights if possible).
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        breastpathq: bool,
    },
    /// PK evaluation of a prediction file against reference labels.
    Evaluate {
        /// Prediction CSV (id,prediction).
        #[arg(long)]
        pred: PathBuf,
        /// Reference CSV (id,label1[,label2,...]).
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Number of bootstrap resamples of the evaluation rows.
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write bootstrap PK samples here, one per line (for ttest).
        #[arg(long)]
        bootstrap_out: Option<PathBuf>,
        /// Tie tolerance on label/score comparisons.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Read the reference in the slide,rid,y layout.
        #[arg(long)]
        breastpathq: bool,
    },
    /// Unpaired t-test between two one-number-per-line files.
    Ttest {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value = "welch")]
        variant: VariantArg,
    },
    /// Write the activation heatmap of one convolutional filter.
    Visualize {
        #[arg(long)]
        weights: PathBuf,
        /// Probe image (PPM).
        #[arg(long)]
        image: PathBuf,
        /// Convolutional layer name.
        #[arg(long)]
        layer: String,
        /// Filter index within the layer.
        #[arg(long)]
        filter: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write a colormapped overlay PPM.
        #[arg(long)]
        overlay: bool,
        /// Overlay blend weight.
        #[arg(long, default_value_t = viz::DEFAULT_OVERLAY_ALPHA)]
        alpha: f64,
        /// Input resolution override (inferred from the weights if possible).
        #[arg(long)]
        size: Option<usize>,
    },
}

fn schema(breastpathq: bool) -> ManifestSchema {
    if breastpathq {
        ManifestSchema::BreastPathQ
    } else {
        ManifestSchema::Standard
    }
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match workers {
        None => Ok(f()),
        Some(n) => {
            if n == 0 {
                return Err(CliError::Usage("--workers must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Internal(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn log_config(cfg: &TrainConfig, size: usize) {
    for line in render_train_config(cfg, size).lines() {
        eprintln!("config: {line}");
    }
}

/// Preset -> config file -> CLI flags, in increasing precedence.
fn resolve_config(
    preset: &str,
    file: Option<&PathBuf>,
    seed: u64,
    size_flag: Option<usize>,
) -> Result<(TrainConfig, Option<usize>, Option<usize>), CliError> {
    let presets = models::presets();
    let mut cfg = presets
        .get(preset)
        .ok_or_else(|| CliError::Usage(format!("unknown preset '{preset}'")))?
        .clone();
    let mut size = None;
    let mut workers = None;
    if let Some(path) = file {
        let file_cfg = RunConfig::load(path)?;
        file_cfg.apply_to(&mut cfg);
        size = file_cfg.size;
        workers = file_cfg.workers;
    }
    cfg.seed = seed;
    if size_flag.is_some() {
        size = size_flag;
    }
    cfg.validate()?;
    Ok((cfg, size, workers))
}

/// Training resolution: never upscale past the native side, default 256.
fn effective_resolution(manifest: &Manifest, requested: Option<usize>) -> Result<usize, CliError> {
    let requested = requested.unwrap_or(256);
    if requested == 0 {
        return Err(CliError::Usage("size must be >= 1".into()));
    }
    let first = manifest
        .rows
        .first()
        .ok_or_else(|| CliError::Data("manifest has no rows".into()))?;
    let patch = crate::imgio::read_ppm(&first.image_path)?;
    Ok(requested.min(patch.width().max(patch.height())))
}

fn load_graph_from_weights(
    weights_path: &Path,
    size_flag: Option<usize>,
    fallback_size: Option<usize>,
) -> Result<(ModelGraph<f32>, ModelKind, usize), CliError> {
    let tensors = nn::read_weight_file(weights_path)?;
    let kind = models::infer_kind(tensors.keys().map(String::as_str))
        .ok_or_else(|| CliError::Data(format!("{}: empty weight file", weights_path.display())))?;
    let size = size_flag
        .or_else(|| models::infer_input_size(kind, &tensors))
        .or(fallback_size)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "cannot infer input size for {kind} weights; pass --size"
            ))
        })?;
    let mut graph = models::build(kind, [3, size, size], 0)?;
    nn::load_weights(&mut graph, weights_path)?;
    Ok((graph, kind, size))
}

fn write_epoch_log(log: &nn::TrainLog, path: &Path) -> Result<(), CliError> {
    let mut text = String::from("epoch,train_loss,val_loss,val_pk\n");
    for e in &log.epochs {
        let pk = e.val_pk.map_or(String::new(), |v| format!("{v}"));
        text.push_str(&format!("{},{},{},{pk}\n", e.epoch, e.train_loss, e.val_loss));
    }
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn train_summary(log: &nn::TrainLog) -> String {
    let best = log
        .epochs
        .get(log.best_epoch.wrapping_sub(1))
        .map(|e| (e.val_loss, e.val_pk));
    let (val_loss, val_pk) = best.unwrap_or((f64::NAN, None));
    format!(
        "epochs_run = {} best_epoch = {} best_val_loss = {:.6} best_val_pk = {} stop = {:?}",
        log.epochs.len(),
        log.best_epoch,
        val_loss,
        val_pk.map_or("n/a".to_string(), |v| format!("{v:.6}")),
        log.stop_reason
    )
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { n, size, seed, out } => {
            eprintln!("config: n = {n}");
            eprintln!("config: size = {size}");
            eprintln!("config: seed = {seed}");
            let manifest = pipeline::generate_synthetic_dataset(n, size, seed, &out)?;
            let manifest_path = out.join("manifest.csv");
            pipeline::save_manifest(&manifest, &manifest_path)?;
            println!("wrote {} images to {} (manifest {})", manifest.len(), out.display(), manifest_path.display());
            Ok(())
        }
        Command::Augment {
            manifest,
            mode,
            seed,
            ledger,
            out,
            workers,
            breastpathq,
        } => {
            let base = pipeline::load_manifest(&manifest, schema(breastpathq))?;
            let (angles, ledger_update): (Vec<RotationAngle>, Option<(PathBuf, Vec<RotationAngle>)>) =
                match mode {
                    AugmentMode::Baseline => (
                        crate::augment::BASELINE_ANGLES
                            .iter()
                            .map(|&d| RotationAngle::new(i64::from(d)))
                            .collect(),
                        None,
                    ),
                    AugmentMode::Full360 => (full_rotation_angles(), None),
                    AugmentMode::Session => {
                        let ledger_path = ledger.ok_or_else(|| {
                            CliError::Usage("--mode session requires --ledger".into())
                        })?;
                        let used = pipeline::read_ledger(&ledger_path)?;
                        let session_index = (used.len() / ANGLES_PER_SESSION) as u32 + 1;
                        let drawn = sample_session_angles(seed, session_index, &used)?;
                        (drawn.clone(), Some((ledger_path, drawn)))
                    }
                };
            eprintln!("config: mode = {mode:?}");
            eprintln!("config: seed = {seed}");
            eprintln!("config: angles = {}", angles.len());
            let augmented = with_workers(workers, || pipeline::augment_with_angles(&base, &angles, &out))??;
            let manifest_path = out.join("manifest.csv");
            pipeline::save_manifest(&augmented, &manifest_path)?;
            if let Some((ledger_path, drawn)) = ledger_update {
                let mut used = pipeline::read_ledger(&ledger_path)?;
                for a in drawn {
                    used.insert(a.degrees());
                }
                pipeline::write_ledger(&ledger_path, &used)?;
            }
            println!(
                "wrote {} rotated images to {} (manifest {})",
                augmented.len(),
                out.display(),
                manifest_path.display()
            );
            Ok(())
        }
        Command::Train {
            manifest,
            model,
            preset,
            seed,
            out,
            log,
            breastpathq,
            common,
        } => {
            let data = pipeline::load_manifest(&manifest, schema(breastpathq))?;
            let (cfg, size_cfg, _) = resolve_config(preset.name(), common.config.as_ref(), seed, common.size)?;
            let resolution = effective_resolution(&data, size_cfg)?;
            log_config(&cfg, resolution);
            let kind = match model {
                ModelArg::TinyShallow => ModelKind::TinyShallow,
                ModelArg::TinyDeep => ModelKind::TinyDeep,
            };
            let (train_half, val_half) = pipeline::split_manifest(&data, cfg.train_fraction, seed)?;
            eprintln!("split: {} train rows, {} validation rows", train_half.len(), val_half.len());
            let train_ds = ManifestDataset::new(&train_half, resolution);
            let val_ds = ManifestDataset::new(&val_half, resolution);
            let mut graph = models::build(kind, [3, resolution, resolution], seeds::derive(seed, "init"))?;
            let train_log = nn::train(&mut graph, &train_ds, &val_ds, &cfg)?;
            nn::save_weights(&graph, &out)?;
            if let Some(log_path) = log {
                write_epoch_log(&train_log, &log_path)?;
            }
            println!("{}", train_summary(&train_log));
            println!("wrote weights to {}", out.display());
            Ok(())
        }
        Command::Session {
            state,
            manifest,
            preset,
            init,
            model,
            weights,
            val,
            seed,
            out_dir,
            breastpathq,
            common,
        } => {
            let base = pipeline::load_manifest(&manifest, schema(breastpathq))?;
            if init {
                let model = model.ok_or_else(|| CliError::Usage("--init requires --model".into()))?;
                let weights = weights.ok_or_else(|| CliError::Usage("--init requires --weights".into()))?;
                let val = val.ok_or_else(|| CliError::Usage("--init requires --val".into()))?;
                let out_dir = out_dir.ok_or_else(|| CliError::Usage("--init requires --out-dir".into()))?;
                let kind = match model {
                    ModelArg::TinyShallow => ModelKind::TinyShallow,
                    ModelArg::TinyDeep => ModelKind::TinyDeep,
                };
                let resolution = effective_resolution(&base, common.size)?;
                let st = pipeline::init_session(&state, &base, kind, resolution, &weights, &val, seed, &out_dir)?;
                println!(
                    "initialized session state {} (cumulative manifest {})",
                    state.display(),
                    st.cumulative_manifest.display()
                );
                Ok(())
            } else {
                let mut st = pipeline::SessionState::load(&state)?;
                let (cfg, _, _) = resolve_config(preset.name(), common.config.as_ref(), st.seed, None)?;
                log_config(&cfg, st.size);
                let (train_log, pk) = pipeline::run_session(&mut st, &base, &cfg)?;
                println!("session {} complete: {}", st.session_index, train_summary(&train_log));
                for (i, rater) in pk.per_rater.iter().enumerate() {
                    println!(
                        "rater {}: pk = {:.6} (pairs={} C={} D={} Tx={})",
                        i + 1,
                        rater.pk,
                        rater.n_pairs_considered,
                        rater.concordant,
                        rater.discordant,
                        rater.ties_pred_only
                    );
                }
                println!("mean_pk = {:.6}", pk.mean_pk);
                println!("cumulative rotations = {}", st.cumulative_rotation_count);
                Ok(())
            }
        }
        Command::Fuse {
            a,
            b,
            seed,
            out,
            finetune,
            manifest,
            preset,
            breastpathq,
            common,
        } => {
            let (graph_a, kind_a, size_a) = load_graph_from_weights(&a, common.size, None)?;
            let (graph_b, kind_b, _) = load_graph_from_weights(&b, common.size, Some(size_a))?;
            eprintln!("config: branch a = {kind_a} ({})", a.display());
            eprintln!("config: branch b = {kind_b} ({})", b.display());
            let mut fused = models::fuse(&graph_a, &graph_b, seeds::derive(seed, "fuse-head"))?;
            if finetune {
                let manifest =
                    manifest.ok_or_else(|| CliError::Usage("--finetune requires --manifest".into()))?;
                let preset = preset.unwrap_or(PresetArg::Combined);
                let data = pipeline::load_manifest(&manifest, schema(breastpathq))?;
                let (cfg, _, _) = resolve_config(preset.name(), common.config.as_ref(), seed, None)?;
                let [_, _, size] = fused.input_shape();
                log_config(&cfg, size);
                let (train_half, val_half) = pipeline::split_manifest(&data, cfg.train_fraction, seed)?;
                let train_ds = ManifestDataset::new(&train_half, size);
                let val_ds = ManifestDataset::new(&val_half, size);
                let train_log = nn::train(&mut fused, &train_ds, &val_ds, &cfg)?;
                println!("{}", train_summary(&train_log));
            }
            nn::save_weights(&fused, &out)?;
            let concat = fused
                .out_shape(fused.penultimate_node())
                .map(|s| s.numel())
                .unwrap_or(0);
            println!("fused model written to {} (concat width {concat})", out.display());
            Ok(())
        }
        Command::Predict {
            weights,
            manifest,
            out,
            size,
            workers,
            breastpathq,
        } => {
            let data = pipeline::load_manifest(&manifest, schema(breastpathq))?;
            // last resort for size-agnostic models: native image size
            let native = data
                .rows
                .first()
                .map(|r| crate::imgio::read_ppm(&r.image_path))
                .transpose()?
                .map(|p| p.width().max(p.height()));
            let (graph, kind, resolution) = load_graph_from_weights(&weights, size, native)?;
            eprintln!("config: model = {kind}");
            eprintln!("config: size = {resolution}");
            let preds = with_workers(workers, || pipeline::predict(&graph, &data, resolution))??;
            pipeline::write_predictions(&preds, &out)?;
            println!("wrote {} predictions to {}", preds.len(), out.display());
            Ok(())
        }
        Command::Evaluate {
            pred,
            reference,
            bootstrap,
            seed,
            bootstrap_out,
            epsilon,
            breastpathq,
        } => {
            let preds = pipeline::read_predictions(&pred)?;
            let (ref_ids, ref_columns) = pipeline::read_reference(&reference, schema(breastpathq))?;
            let index: BTreeMap<&str, usize> = ref_ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect();
            let mut scores = Vec::with_capacity(preds.len());
            let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(preds.len()); ref_columns.len()];
            for (id, score) in &preds {
                let &row = index.get(id.as_str()).ok_or_else(|| {
                    CliError::Data(format!("prediction id '{id}' not present in reference file"))
                })?;
                scores.push(*score);
                for (c, col) in ref_columns.iter().enumerate() {
                    columns[c].push(col[row]);
                }
            }
            let report = metric::average_pk_with_epsilon(&columns, &scores, epsilon)?;
            for (i, rater) in report.per_rater.iter().enumerate() {
                println!(
                    "rater {}: pk = {:.6} (pairs={} C={} D={} Tx={})",
                    i + 1,
                    rater.pk,
                    rater.n_pairs_considered,
                    rater.concordant,
                    rater.discordant,
                    rater.ties_pred_only
                );
            }
            println!("mean_pk = {:.6}", report.mean_pk);
            if let Some(b) = bootstrap {
                let samples = metric::bootstrap_pk(&columns, &scores, b, seed)?;
                let mean = samples.iter().sum::<f64>() / samples.len() as f64;
                let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (samples.len() as f64 - 1.0).max(1.0);
                println!("bootstrap: n = {b} mean_pk = {mean:.6} sd = {:.6}", var.sqrt());
                if let Some(path) = bootstrap_out {
                    let text: String = samples.iter().map(|v| format!("{v}\n")).collect();
                    std::fs::write(&path, text)
                        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    println!("bootstrap samples written to {}", path.display());
                }
            }
            Ok(())
        }
        Command::Ttest { a, b, variant } => {
            let read_numbers = |path: &Path| -> Result<Vec<f64>, CliError> {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                let mut out = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    out.push(line.parse::<f64>().map_err(|_| {
                        CliError::Data(format!("{} line {}: '{line}' is not a number", path.display(), i + 1))
                    })?);
                }
                Ok(out)
            };
            let sample_a = read_numbers(&a)?;
            let sample_b = read_numbers(&b)?;
            let variant = match variant {
                VariantArg::Welch => TTestVariant::Welch,
                VariantArg::Student => TTestVariant::Student,
            };
            let r = metric::unpaired_t_test(&sample_a, &sample_b, variant)?;
            println!(
                "t = {:.6} df = {:.6} p = {:.6} variant = {}",
                r.t_statistic, r.degrees_of_freedom, r.p_two_tailed, r.variant
            );
            Ok(())
        }
        Command::Visualize {
            weights,
            image,
            layer,
            filter,
            out,
            overlay,
            alpha,
            size,
        } => {
            let patch = crate::imgio::read_ppm(&image)?;
            let native = patch.width().max(patch.height());
            let (graph, kind, resolution) = load_graph_from_weights(&weights, size, Some(native))?;
            eprintln!("config: model = {kind}");
            eprintln!("config: size = {resolution}");
            // resize the probe to the graph input if needed
            let probe = if patch.width() == resolution && patch.height() == resolution {
                patch
            } else {
                let float = patch.to_float();
                let method = if float.width() > resolution {
                    crate::imgio::ResizeMethod::Area
                } else {
                    crate::imgio::ResizeMethod::Bilinear
                };
                crate::imgio::resize(&float, resolution, resolution, method)?.to_patch()?
            };
            std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
            let heatmap = viz::activation_heatmap(&graph, &probe, &layer, filter)?;
            let pgm = out.join(format!("heatmap_{layer}_{filter}.pgm"));
            crate::imgio::write_pgm(&heatmap.to_gray(), &pgm)?;
            println!("wrote {}", pgm.display());
            if overlay {
                let blended = viz::overlay(&heatmap, &probe, alpha)?;
                let ppm = out.join(format!("overlay_{layer}_{filter}.ppm"));
                crate::imgio::write_ppm(&blended, &ppm)?;
                println!("wrote {}", ppm.display());
            }
            Ok(())
        }
    }
}

// parse_split is part of the config surface the CLI re-exports for tests
pub use crate::config::parse_split as parse_split_arg;

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Data("x".into()).exit_code(), 2);
        assert_eq!(CliError::Internal("x".into()).exit_code(), 3);
    }

    #[test]
    fn split_helper_reexport() {
        assert_eq!(parse_split_arg("80/20").unwrap(), 0.8);
    }
}
