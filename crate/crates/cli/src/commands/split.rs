use std::path::{Path, PathBuf};

use jpegclass::ExtractionConfig;
use jpegclass_nn::{split_dataset, DatasetManifest, Split};
use serde::Serialize;

use super::extract::read_index;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitSummary {
    pub manifest: String,
    pub classes: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Stratified 70/10/20 split of the files listed in `features/index.jsonl`.
/// Manifest paths are written relative to the manifest's directory when the
/// manifest lives in `features`, absolute otherwise.
pub fn split(features: &Path, manifest_path: &Path, seed: u64) -> CliResult<(DatasetManifest, SplitSummary)> {
    let index = read_index(features)?;
    let Some(first) = index.first() else {
        return Err(CliError::failure(format!("{}: no extracted files", features.display())));
    };
    let extraction = ExtractionConfig { mode: first.mode, crop_width: first.crop_width, quality: None };
    if index.iter().any(|e| (e.mode, e.crop_width) != (extraction.mode, extraction.crop_width)) {
        return Err(CliError::usage("index mixes feature modes or crop widths"));
    }
    let manifest_dir = manifest_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let same_dir = same_path(manifest_dir, features);
    let mut classes: Vec<(String, Vec<String>)> = Vec::new();
    let mut sorted = index.clone();
    sorted.sort_by(|a, b| (&a.class, &a.path).cmp(&(&b.class, &b.path)));
    for e in sorted {
        let path = if same_dir {
            e.path.clone()
        } else {
            absolute(&features.join(&e.path)).display().to_string()
        };
        match classes.last_mut() {
            Some((c, items)) if *c == e.class => items.push(path),
            _ => classes.push((e.class.clone(), vec![path])),
        }
    }
    let manifest = split_dataset(&classes, seed, extraction)?;
    let mut buf = Vec::new();
    manifest.write_jsonl(&mut buf).expect("in-memory write");
    std::fs::write(manifest_path, buf).map_err(|e| CliError::io(manifest_path, e))?;
    let summary = SplitSummary {
        manifest: manifest_path.display().to_string(),
        classes: manifest.num_classes(),
        train: manifest.count(Split::Train),
        val: manifest.count(Split::Val),
        test: manifest.count(Split::Test),
    };
    Ok((manifest, summary))
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn same_path(a: &Path, b: &Path) -> bool {
    absolute(a) == absolute(b)
}
