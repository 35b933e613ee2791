//! Dataset manifests and stratified splitting.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jpegclass::{read_features, ExtractionConfig, FeatureMode};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::models::{input_from_features, ModelInput};
use crate::scalar::Real;

/// Split percentages: train, validation, test.
pub const SPLIT_PERCENT: [u64; 3] = [70, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = NnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(NnError::Config(format!("unknown split {s:?}"))),
        }
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub label: usize,
    pub class: String,
    pub split: Split,
    pub mode: FeatureMode,
    pub crop_width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
    pub extraction: ExtractionConfig,
}

/// Sizes of the train/val/test parts of `n` items, by largest remainder
/// (ties go to the earlier part).
pub fn split_counts(n: usize) -> [usize; 3] {
    let n = n as u64;
    let mut counts = SPLIT_PERCENT.map(|p| n * p / 100);
    let rems = SPLIT_PERCENT.map(|p| n * p % 100);
    let mut left = n - counts.iter().sum::<u64>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts.map(|c| c as usize)
}

/// Stratified seeded split. `classes` is `(class name, item paths)` in label order.
pub fn split_dataset(classes: &[(String, Vec<String>)], seed: u64, extraction: ExtractionConfig) -> Result<DatasetManifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (label, (name, items)) in classes.iter().enumerate() {
        if items.len() < 3 {
            return Err(NnError::ClassTooSmall { class: name.clone(), count: items.len() });
        }
        let mut items = items.clone();
        items.shuffle(&mut rng);
        let counts = split_counts(items.len());
        let splits = Split::ALL.iter().zip(counts).flat_map(|(&s, c)| std::iter::repeat(s).take(c));
        for (path, split) in items.into_iter().zip(splits) {
            entries.push(ManifestEntry {
                path,
                label,
                class: name.clone(),
                split,
                mode: extraction.mode,
                crop_width: extraction.crop_width,
            });
        }
    }
    Ok(DatasetManifest { entries, class_names: classes.iter().map(|(n, _)| n.clone()).collect(), extraction })
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses JSON lines; class names are recovered from the labels.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| NnError::Config(format!("manifest: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ManifestEntry =
                serde_json::from_str(&line).map_err(|e| NnError::Config(format!("manifest line {}: {e}", i + 1)))?;
            entries.push(e);
        }
        let Some(first) = entries.first() else {
            return Err(NnError::Config("manifest is empty".into()));
        };
        let extraction = ExtractionConfig { mode: first.mode, crop_width: first.crop_width, quality: None };
        let k = entries.iter().map(|e| e.label + 1).max().unwrap_or(0);
        let mut class_names: Vec<Option<String>> = vec![None; k];
        for e in &entries {
            if (e.mode, e.crop_width) != (extraction.mode, extraction.crop_width) {
                return Err(NnError::Config(format!("{}: mixed extraction settings in manifest", e.path)));
            }
            match &class_names[e.label] {
                Some(n) if n != &e.class => {
                    return Err(NnError::Config(format!("label {} names both {n:?} and {:?}", e.label, e.class)))
                }
                _ => class_names[e.label] = Some(e.class.clone()),
            }
        }
        let class_names = class_names
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.ok_or_else(|| NnError::Config(format!("label {i} has no entries"))))
            .collect::<Result<_>>()?;
        Ok(DatasetManifest { entries, class_names, extraction })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| NnError::Config(format!("{}: {e}", path.display())))?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}

/// A decoded feature set with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<F> {
    pub input: ModelInput<F>,
    pub label: usize,
}

/// Resolves a manifest path against the manifest's directory.
pub fn resolve(base: &Path, entry: &ManifestEntry) -> PathBuf {
    let p = Path::new(&entry.path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads every feature file of one split, in manifest order.
pub fn load_split<F: Real>(manifest: &DatasetManifest, split: Split, base: &Path) -> Result<Vec<Sample<F>>> {
    manifest
        .split(split)
        .map(|e| {
            let path = resolve(base, e);
            let file = std::fs::File::open(&path).map_err(|err| NnError::FeatureIo(format!("{}: {err}", path.display())))?;
            let features = read_features(std::io::BufReader::new(file))
                .map_err(|err| NnError::FeatureIo(format!("{}: {err}", path.display())))?;
            Ok(Sample { input: input_from_features(&features), label: e.label })
        })
        .collect()
}
