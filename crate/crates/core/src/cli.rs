//! The `meshgnn` command line.
//!
//! ```text
//! meshgnn gen-synthetic --out data --samples 600 --structures 4 --class-effect 0.3
//! meshgnn extract-features --manifest data/manifest.csv --features fpfh --cache-dir cache
//! meshgnn train --manifest data/manifest.csv --structures 4 --conv spline --features fpfh --aug 0.1 --out run
//! meshgnn evaluate --checkpoint run --manifest run/split_test.csv
//! meshgnn predict --checkpoint run a.off b.off c.off d.off
//! ```
//!
//! Exit codes: 0 on success, 1 for usage errors (unknown flags, bad flag
//! values), 2 for data or configuration errors met while running.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{cache, FeatureConfig, FeatureMode, DEFAULT_MAX_NEIGHBORS, DEFAULT_RADIUS};
use crate::graph::assemble_sample;
use crate::mesh::load_off;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::ConvKind;
use crate::pipeline::synthetic::{gen_synthetic, DomainShift, PoseMode, SyntheticConfig};
use crate::pipeline::train::{evaluate, predict_proba, train, TrainConfig, CHECKPOINT_FILE};
use crate::pipeline::{Manifest, SplitFractions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "meshgnn", version, about = "Graph neural networks over sets of 3D triangle meshes")]
struct Cli {
    /// Worker threads for feature extraction, augmentation and evaluation
    /// (count; 0 = one per core). Results do not depend on it.
    #[arg(long, global = true, env = "MESHGNN_THREADS", default_value_t = 0, value_name = "N")]
    threads: usize,

    /// Output style on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset: OFF meshes plus manifest.csv.
    GenSynthetic(GenArgs),
    /// Compute node features for every mesh of a manifest into a cache directory.
    ExtractFeatures(ExtractArgs),
    /// Split a manifest, train, and write the best-validation checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on every sample of a manifest.
    Evaluate(EvaluateArgs),
    /// Class probabilities for one sample given as N mesh files.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// Node features.
    #[arg(long, value_enum, default_value_t = FeatureArg::Fpfh)]
    features: FeatureArg,
    /// FPFH neighborhood radius (mm).
    #[arg(long, default_value_t = DEFAULT_RADIUS, value_name = "MM", allow_negative_numbers = true)]
    radius: f64,
    /// FPFH neighbor cap per vertex (count).
    #[arg(long, default_value_t = DEFAULT_MAX_NEIGHBORS, value_name = "N")]
    max_neighbors: usize,
}

impl FeatureArgs {
    fn config(&self) -> FeatureConfig {
        FeatureConfig {
            radius: self.radius,
            max_neighbors: self.max_neighbors,
            ..FeatureConfig::new(self.features.into())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FeatureArg {
    Constant,
    Positional,
    Fpfh,
}

impl From<FeatureArg> for FeatureMode {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Constant => FeatureMode::Constant,
            FeatureArg::Positional => FeatureMode::Positional,
            FeatureArg::Fpfh => FeatureMode::Fpfh,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ConvArg {
    Gcn,
    Graphconv,
    Spline,
}

impl From<ConvArg> for ConvKind {
    fn from(c: ConvArg) -> Self {
        match c {
            ConvArg::Gcn => ConvKind::Gcn,
            ConvArg::Graphconv => ConvKind::GraphConv,
            ConvArg::Spline => ConvKind::Spline,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PoseArg {
    Aligned,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ShiftArg {
    None,
    Translate,
    Scale,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of samples (count, ≥ 4).
    #[arg(long, default_value_t = 600, value_name = "N")]
    samples: usize,
    /// Meshes per sample (count).
    #[arg(long, default_value_t = 15, value_name = "N")]
    structures: usize,
    /// Class bump amplitude (fraction of the 8 mm base radius).
    #[arg(long, default_value_t = 0.3, value_name = "FRACTION", allow_negative_numbers = true)]
    class_effect: f64,
    /// Per-sample pose: aligned, or random rotation plus up to 50 mm translation.
    #[arg(long, value_enum, default_value_t = PoseArg::Aligned)]
    pose: PoseArg,
    /// Global domain shift: none, +100 mm translation, or ×1.1 scale.
    #[arg(long, value_enum, default_value_t = ShiftArg::None)]
    shift: ShiftArg,
    /// Random seed (integer).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Manifest CSV (path).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    /// Feature cache directory (path).
    #[arg(long, value_name = "DIR")]
    cache_dir: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Manifest CSV (path).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Convolution kind.
    #[arg(long, value_enum, default_value_t = ConvArg::Spline)]
    conv: ConvArg,
    #[command(flatten)]
    features: FeatureArgs,
    /// Maximum per-coordinate node jitter during training (mm).
    #[arg(long, default_value_t = 0.0, value_name = "MM", allow_negative_numbers = true)]
    aug: f64,
    /// Random seed for initialization, splitting, shuffling and jitter (integer).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum training epochs (count).
    #[arg(long, default_value_t = 50, value_name = "N")]
    epochs: usize,
    /// Mini-batch size (samples).
    #[arg(long, default_value_t = 128, value_name = "N")]
    batch: usize,
    /// Adam learning rate (dimensionless).
    #[arg(long, default_value_t = 1e-3, value_name = "RATE", allow_negative_numbers = true)]
    lr: f64,
    /// Width of every convolution and of the hidden FC layer (units).
    #[arg(long, default_value_t = 32, value_name = "N")]
    hidden: usize,
    /// Spline kernel size per pseudo-coordinate dimension (count).
    #[arg(long, default_value_t = 5, value_name = "N")]
    spline_kernel: usize,
    /// Number of classes (count).
    #[arg(long, default_value_t = 2, value_name = "N")]
    classes: usize,
    /// Meshes per sample (count).
    #[arg(long, default_value_t = 15, value_name = "N")]
    structures: usize,
    /// Train, validation and test fractions (three numbers summing to 1).
    #[arg(long, default_value = "0.7,0.1,0.2", value_name = "T,V,E")]
    split: String,
    /// Stop once validation AUC reaches 1; the saved checkpoint is unchanged.
    #[arg(long)]
    stop_at_perfect_val: bool,
    /// Output directory for checkpoint.txt, epochs.csv and split_*.csv (path).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Feature cache directory (path).
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Checkpoint file, or a training output directory holding checkpoint.txt (path).
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Manifest CSV (path).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Feature cache directory (path).
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Checkpoint file, or a training output directory holding checkpoint.txt (path).
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// One OFF mesh per structure, in structure order (paths).
    #[arg(required = true, value_name = "MESH")]
    meshes: Vec<PathBuf>,
    /// Feature cache directory (path).
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

/// Run the CLI on `argv` (including the program name), printing results to
/// standard output and diagnostics to standard error. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_target(false)
        .try_init();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} threads: {e}", cli.threads);
            return EXIT_DATA;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> std::result::Result<String, Failure> {
    match &cli.command {
        Command::GenSynthetic(a) => gen_cmd(a),
        Command::ExtractFeatures(a) => extract_cmd(a, cli.format),
        Command::Train(a) => train_cmd(a, cli.format),
        Command::Evaluate(a) => evaluate_cmd(a, cli.format),
        Command::Predict(a) => predict_cmd(a, cli.format),
    }
}

fn gen_cmd(a: &GenArgs) -> std::result::Result<String, Failure> {
    let config = SyntheticConfig {
        pose: match a.pose {
            PoseArg::Aligned => PoseMode::Aligned,
            PoseArg::Random => PoseMode::Random,
        },
        shift: match a.shift {
            ShiftArg::None => DomainShift::None,
            ShiftArg::Translate => DomainShift::Translate,
            ShiftArg::Scale => DomainShift::Scale,
        },
        ..SyntheticConfig::new(a.samples, a.structures, a.class_effect, a.seed)
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let path = gen_synthetic(&config, &a.out)?;
    Ok(format!("{}\n", path.display()))
}

fn feature_config(a: &FeatureArgs) -> std::result::Result<FeatureConfig, Failure> {
    let f = a.config();
    f.validate().map_err(|e| usage(e.to_string()))?;
    Ok(f)
}

fn extract_cmd(a: &ExtractArgs, format: Format) -> std::result::Result<String, Failure> {
    let features = feature_config(&a.features)?;
    let manifest = Manifest::load(&a.manifest)?;
    std::fs::create_dir_all(&a.cache_dir).map_err(|e| Error::Io {
        path: a.cache_dir.clone(),
        source: e,
    })?;
    let paths: Vec<&PathBuf> = manifest.rows.iter().flat_map(|r| &r.meshes).collect();
    let entries = paths
        .par_iter()
        .map(|p| {
            let mesh = load_off(p)?;
            let m = cache::cached_node_features(&a.cache_dir, &mesh, &features)?;
            Ok((*p, cache::entry_path(&a.cache_dir, &mesh, &features), m.rows(), m.cols()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("mesh,cache_file,rows,cols\n");
            for (mesh, entry, r, c) in &entries {
                let _ = writeln!(out, "{},{},{r},{c}", mesh.display(), entry.display());
            }
        }
        Format::Text => {
            let _ = writeln!(
                out,
                "{} meshes, {} features each, cached in {}",
                entries.len(),
                features.dim(),
                a.cache_dir.display()
            );
        }
    }
    Ok(out)
}

fn parse_split(s: &str) -> std::result::Result<SplitFractions, Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("--split '{s}' is not three comma-separated numbers")))?;
    match parts[..] {
        [t, v, e] => SplitFractions::new(t, v, e).map_err(|e| usage(e.to_string())),
        _ => Err(usage(format!("--split '{s}' needs exactly three fractions"))),
    }
}

fn train_config(a: &TrainArgs) -> std::result::Result<TrainConfig, Failure> {
    if !(a.aug >= 0.0) {
        return Err(usage("aug must be ≥ 0"));
    }
    let features = feature_config(&a.features)?;
    let mut config = TrainConfig::new(a.conv.into(), features, a.structures);
    config.seed = a.seed;
    config.max_epochs = a.epochs;
    config.batch_size = a.batch;
    config.lr = a.lr;
    config.aug_offset = a.aug;
    config.fractions = parse_split(&a.split)?;
    config.stop_at_perfect_val = a.stop_at_perfect_val;
    config.model.hidden = a.hidden;
    config.model.spline_kernel_size = a.spline_kernel;
    config.model.n_classes = a.classes;
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn train_cmd(a: &TrainArgs, format: Format) -> std::result::Result<String, Failure> {
    let config = train_config(a)?;
    let (path, outcome) = train(&config, &a.manifest, &a.out, a.cache_dir.as_deref())?;
    let mut out = String::new();
    match format {
        Format::Csv => out.push_str(&outcome.epoch_log_csv()),
        Format::Text => {
            let _ = writeln!(out, "{:>5}  {:>12}  {:>8}", "epoch", "train_loss", "val_auc");
            for e in &outcome.epochs {
                let _ = writeln!(out, "{:>5}  {:>12.6}  {:>8.4}", e.epoch, e.train_loss, e.val_auc);
            }
            let _ = writeln!(out, "best epoch {}", outcome.best_epoch());
            let _ = writeln!(out, "checkpoint {}", path.display());
        }
    }
    Ok(out)
}

fn checkpoint_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(CHECKPOINT_FILE)
    } else {
        p.to_path_buf()
    }
}

fn evaluate_cmd(a: &EvaluateArgs, format: Format) -> std::result::Result<String, Failure> {
    let checkpoint = Checkpoint::load(checkpoint_path(&a.checkpoint))?;
    let manifest = Manifest::load(&a.manifest)?;
    let metrics = evaluate(&checkpoint, &manifest, a.cache_dir.as_deref())?;
    Ok(match format {
        Format::Csv => metrics.to_csv(),
        Format::Text => metrics.to_text(),
    })
}

fn predict_cmd(a: &PredictArgs, format: Format) -> std::result::Result<String, Failure> {
    let checkpoint = Checkpoint::load(checkpoint_path(&a.checkpoint))?;
    let n = checkpoint.model.n_structures;
    if a.meshes.len() != n {
        return Err(Error::StructureCount {
            expected: n,
            got: a.meshes.len(),
        }
        .into());
    }
    let meshes = a.meshes.iter().map(load_off).collect::<Result<Vec<_>>>()?;
    let sample = match &a.cache_dir {
        None => assemble_sample("input", &meshes, n, 0, BTreeMap::new(), &checkpoint.features)?,
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let graphs = meshes
                .iter()
                .enumerate()
                .map(|(s, m)| {
                    let feats = cache::cached_node_features(dir, m, &checkpoint.features)?;
                    Ok(crate::graph::graph_with_features(m, &checkpoint.features, s, feats))
                })
                .collect::<Result<Vec<_>>>()?;
            crate::graph::Sample {
                sample_id: "input".into(),
                label: 0,
                graphs,
                metadata: BTreeMap::new(),
            }
        }
    };
    let probs = predict_proba(&checkpoint.params, &checkpoint.model, std::slice::from_ref(&sample), 1)?;
    let mut out = String::new();
    match format {
        Format::Csv => out.push_str("class,probability\n"),
        Format::Text => {}
    }
    for (k, p) in probs[0].iter().enumerate() {
        match format {
            Format::Csv => {
                let _ = writeln!(out, "{k},{p}");
            }
            Format::Text => {
                let _ = writeln!(out, "class {k}: {p:.6}");
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("meshgnn").chain(args.iter().copied()))
    }

    #[test]
    fn defaults_follow_training_setup() {
        let cli = parse(&["train", "--manifest", "m.csv", "--out", "o"]).unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let c = train_config(&a).ok().unwrap();
        assert_eq!((c.batch_size, c.lr, c.max_epochs), (128, 1e-3, 50));
        assert_eq!((c.model.hidden, c.model.spline_kernel_size, c.model.n_structures), (32, 5, 15));
        assert_eq!((c.features.radius, c.features.max_neighbors), (10.0, 100));
        assert_eq!(c.model.conv_kind, ConvKind::Spline);
    }

    #[test]
    fn negative_aug_is_a_usage_error() {
        let cli = parse(&["train", "--manifest", "m.csv", "--out", "o", "--aug", "-1"]).unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let f = train_config(&a).err().unwrap();
        assert_eq!(f.code, EXIT_USAGE);
        assert_eq!(f.message, "aug must be ≥ 0");
    }

    #[test]
    fn split_flag() {
        assert!(parse_split("0.8,0.1,0.1").is_ok());
        assert_eq!(parse_split("0.8,0.1").err().unwrap().code, EXIT_USAGE);
        assert_eq!(parse_split("0.8,0.3,0.1").err().unwrap().code, EXIT_USAGE);
    }

    #[test]
    fn unknown_flags_exit_one() {
        assert_eq!(run(["meshgnn", "train", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["meshgnn", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["meshgnn", "--help"]), EXIT_OK);
    }
}
