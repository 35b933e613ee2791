//! Batch pipeline over class-per-directory JPEG datasets.
//!
//! ```text
//! jpegclass inspect photo.jpg --coeffs
//! jpegclass extract --mode bitstream --crop 128 --in images/ --out features/
//! jpegclass split --in features/ --out features/manifest.jsonl --seed 1
//! jpegclass train --method 2 --manifest features/manifest.jsonl --checkpoint m2.jckp
//! jpegclass eval --manifest features/manifest.jsonl --checkpoint m2.jckp --split test
//! ```

pub mod commands;
pub mod error;
pub mod layout;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use jpegclass::{ExtractionConfig, FeatureMode, DEFAULT_CROP_WIDTH};
use jpegclass_nn::{Split, TrainConfig};
use serde::Serialize;

pub use error::{CliError, CliResult, Exit};

use commands::model::ArchOptions;

/// Caps the number of worker threads.
pub const THREADS_ENV: &str = "JPEGCLASS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "jpegclass", version, about = "Classify JPEG images from their transform coefficients or raw entropy-coded bits")]
pub struct Cli {
    /// Seed for every random choice (splits, initialization, shuffling).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path (file or directory, per subcommand).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Transform,
    Bitstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dtype {
    F32,
    F64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print markers, tables and geometry of one JPEG.
    Inspect {
        file: PathBuf,
        /// Also dump every block's quantized coefficients (JSON).
        #[arg(long)]
        coeffs: bool,
    },
    /// Write one feature file per image of a class-per-directory tree.
    Extract {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Bits kept per block in bitstream mode.
        #[arg(long, default_value_t = DEFAULT_CROP_WIDTH)]
        crop: usize,
        #[arg(long = "in")]
        input: PathBuf,
        /// Encoder quality of the corpus, recorded as metadata.
        #[arg(long)]
        quality: Option<u32>,
    },
    /// Stratified 70/10/20 split of an extracted feature directory.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Train a classifier and write a checkpoint plus history CSV.
    Train {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        method: u8,
        #[arg(long)]
        manifest: PathBuf,
        /// JSON training configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// History CSV path (default: next to the checkpoint).
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        arch: ArchArgs,
    },
    /// Evaluate a checkpoint on one split of a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Finite-difference gradient check of small versions of each method.
    Gradcheck {
        /// Methods to check (default: all).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        method: Vec<u8>,
        #[arg(long, value_enum, default_value_t = Dtype::F32)]
        dtype: Dtype,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ArchArgs {
    #[arg(long)]
    pub stem_channels: Option<usize>,
    #[arg(long)]
    pub trunk_channels: Option<usize>,
    #[arg(long)]
    pub residual_blocks: Option<usize>,
    #[arg(long)]
    pub attention_heads: Option<usize>,
    #[arg(long)]
    pub attention_layers: Option<usize>,
}

impl From<&ArchArgs> for ArchOptions {
    fn from(a: &ArchArgs) -> Self {
        ArchOptions {
            stem_channels: a.stem_channels,
            trunk_channels: a.trunk_channels,
            residual_blocks: a.residual_blocks,
            attention_heads: a.attention_heads,
            attention_layers: a.attention_layers,
        }
    }
}

/// Thread count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String, out: Option<&Path>) -> CliResult<()> {
    let body = match format {
        Format::Json => serde_json::to_string_pretty(value).expect("serializable") + "\n",
        Format::Text => text(),
    };
    match out {
        Some(p) => std::fs::write(p, body).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("Config: {}: {e}", path.display())))
}

/// Runs one parsed command.
pub fn run(cli: &Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Inspect { file, coeffs } => {
            let report = commands::inspect::inspect(file, *coeffs)?;
            let format = if *coeffs { Format::Json } else { cli.format };
            emit(format, &report, || commands::inspect::render_text(&report), out)
        }
        Command::Extract { mode, crop, input, quality } => {
            let out = out.ok_or_else(|| CliError::usage("extract needs --out DIR"))?;
            let mode = match mode {
                ModeArg::Transform => FeatureMode::Transform,
                ModeArg::Bitstream => FeatureMode::Bitstream,
            };
            let config = ExtractionConfig { mode, crop_width: *crop, quality: *quality };
            let summary = with_pool(|| commands::extract::extract(input, out, &config))?;
            emit(cli.format, &summary, || summary.line() + "\n", None)
        }
        Command::Split { input } => {
            let manifest = out.map_or_else(|| input.join("manifest.jsonl"), Path::to_path_buf);
            let (_, summary) = commands::split::split(input, &manifest, seed)?;
            emit(
                cli.format,
                &summary,
                || format!("{}: {} classes, {}/{}/{} train/val/test\n", summary.manifest, summary.classes, summary.train, summary.val, summary.test),
                None,
            )
        }
        Command::Train { method, manifest, config, checkpoint, history, arch } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let history = history.clone().unwrap_or_else(|| commands::model::history_path_for(checkpoint));
            let summary = commands::model::train_cmd(*method, manifest, &cfg, &arch.into(), checkpoint, &history)?;
            emit(
                cli.format,
                &summary,
                || {
                    format!(
                        "trained method {} for {} epochs ({:?}); best epoch {}, final train accuracy {:.4}\n",
                        summary.spec.method_id, summary.epochs, summary.stop_reason, summary.best_epoch, summary.final_train_acc
                    )
                },
                out,
            )
        }
        Command::Eval { manifest, checkpoint, split } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
                SplitArg::Test => Split::Test,
            };
            let report = commands::model::eval_cmd(manifest, checkpoint, split)?;
            let m = &report.metrics;
            emit(
                cli.format,
                &report,
                || {
                    format!(
                        "{} ({} images): accuracy {:.4}, macro F1 {:.4}, macro precision {:.4}, macro recall {:.4}\n",
                        report.split, report.count, m.accuracy, m.macro_f1, m.macro_precision, m.macro_recall
                    )
                },
                out,
            )
        }
        Command::Gradcheck { method, dtype, seeds } => {
            let methods: Vec<u8> = if method.is_empty() { (1..=5).collect() } else { method.clone() };
            let reports = commands::gradcheck::gradcheck(&methods, *dtype == Dtype::F64, *seeds, seed)?;
            emit(
                cli.format,
                &reports,
                || {
                    reports
                        .iter()
                        .map(|r| {
                            format!(
                                "method {} {}: {} checks over {} seeds, max rel err {:.2e} (tol {:.0e}), {} kink crossings skipped, {}\n",
                                r.method, r.dtype, r.checked, r.seeds, r.max_rel_err, r.tolerance, r.skipped_kinks,
                                if r.passed() { "ok" } else { "FAILED" }
                            )
                        })
                        .collect()
                },
                out,
            )?;
            if reports.iter().all(|r| r.passed()) {
                Ok(())
            } else {
                Err(CliError::failure("gradient check failed"))
            }
        }
    }
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
