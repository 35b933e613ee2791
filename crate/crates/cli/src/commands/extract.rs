use std::io::Write;
use std::path::{Path, PathBuf};

use jpegclass::{extract_features, write_features, ExtractionConfig, FeatureFile, FeatureMode, ImageFeatures};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::layout::class_dirs;

/// Name of the per-directory list of extracted files.
pub const INDEX_FILE: &str = "index.jsonl";

/// One extracted file, as listed in `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexEntry {
    /// Relative to the output directory.
    pub path: String,
    pub class: String,
    pub mode: FeatureMode,
    pub crop_width: usize,
    pub truncated_blocks: usize,
    pub padded_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtractSummary {
    pub mode: FeatureMode,
    pub crop_width: usize,
    pub total: usize,
    pub processed: usize,
    pub failed: Vec<String>,
    pub truncated_blocks: usize,
    pub padded_blocks: usize,
}

impl ExtractSummary {
    pub fn line(&self) -> String {
        format!(
            "extracted {}/{} files ({:?}, crop {}): {} truncated blocks, {} padded blocks, {} failed",
            self.processed,
            self.total,
            self.mode,
            self.crop_width,
            self.truncated_blocks,
            self.padded_blocks,
            self.failed.len()
        )
    }
}

struct Job {
    class: String,
    src: PathBuf,
    rel: String,
}

fn run_one(job: &Job, out: &Path, config: &ExtractionConfig) -> Result<IndexEntry, String> {
    let bytes = std::fs::read(&job.src).map_err(|e| format!("IoError: {e}"))?;
    let features = extract_features(&bytes, config).map_err(|e| e.to_string())?;
    let (truncated, padded) = match &features {
        ImageFeatures::Bitstream(b) => (b.truncated_count, b.padded_count),
        ImageFeatures::Transform(_) => (0, 0),
    };
    let file = FeatureFile::from(&features);
    let dst = out.join(&job.rel);
    let mut buf = Vec::new();
    write_features(&mut buf, &file).map_err(|e| e.to_string())?;
    std::fs::write(&dst, buf).map_err(|e| format!("IoError: {}: {e}", dst.display()))?;
    Ok(IndexEntry {
        path: job.rel.clone(),
        class: job.class.clone(),
        mode: config.mode,
        crop_width: config.crop_width,
        truncated_blocks: truncated,
        padded_blocks: padded,
    })
}

/// Extracts every JPEG under `input/<class>/` into `out/<class>/<stem>.jtfx`
/// and writes `out/index.jsonl` in sorted path order. Per-file failures are
/// logged and skipped.
pub fn extract(input: &Path, out: &Path, config: &ExtractionConfig) -> CliResult<ExtractSummary> {
    if config.crop_width == 0 {
        return Err(CliError::usage("crop width must be at least 1"));
    }
    let classes = class_dirs(input, &["jpg", "jpeg"])?;
    let mut jobs = Vec::new();
    for (class, files) in &classes {
        std::fs::create_dir_all(out.join(class)).map_err(|e| CliError::io(&out.join(class), e))?;
        for f in files {
            let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            jobs.push(Job { class: class.clone(), src: f.clone(), rel: format!("{class}/{stem}.jtfx") });
        }
    }
    let results: Vec<Result<IndexEntry, String>> = jobs.par_iter().map(|j| run_one(j, out, config)).collect();

    let mut summary = ExtractSummary {
        mode: config.mode,
        crop_width: config.crop_width,
        total: jobs.len(),
        processed: 0,
        failed: Vec::new(),
        truncated_blocks: 0,
        padded_blocks: 0,
    };
    let index_path = out.join(INDEX_FILE);
    let mut index = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(e) => {
                summary.processed += 1;
                summary.truncated_blocks += e.truncated_blocks;
                summary.padded_blocks += e.padded_blocks;
                serde_json::to_writer(&mut index, &e).expect("serializable");
                index.write_all(b"\n").expect("in-memory write");
            }
            Err(msg) => {
                warn!("skipping {}: {msg}", job.src.display());
                summary.failed.push(job.src.display().to_string());
            }
        }
    }
    std::fs::write(&index_path, index).map_err(|e| CliError::io(&index_path, e))?;
    if summary.processed == 0 {
        return Err(CliError::failure(format!("no files extracted from {}: {}", input.display(), summary.line())));
    }
    Ok(summary)
}

pub fn read_index(dir: &Path) -> CliResult<Vec<IndexEntry>> {
    let path = dir.join(INDEX_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::usage(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}
