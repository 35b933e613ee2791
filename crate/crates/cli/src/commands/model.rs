use std::path::{Path, PathBuf};

use jpegclass::{FeatureMode, ImageGeometry};
use jpegclass_nn::checkpoint::CheckpointMeta;
use jpegclass_nn::{
    build_model, evaluate, load_checkpoint, load_split, save_checkpoint, train, DatasetManifest, MethodSpec,
    MetricsReport, NnError, Sample, Split, StopReason, TrainConfig,
};
use log::info;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Architecture overrides on top of the method defaults.
#[derive(Debug, Clone, Default)]
pub struct ArchOptions {
    pub stem_channels: Option<usize>,
    pub trunk_channels: Option<usize>,
    pub residual_blocks: Option<usize>,
    pub attention_heads: Option<usize>,
    pub attention_layers: Option<usize>,
}

impl ArchOptions {
    fn apply(&self, spec: &mut MethodSpec) {
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut spec.stem_channels, self.stem_channels);
        set(&mut spec.trunk_channels, self.trunk_channels);
        set(&mut spec.residual_blocks, self.residual_blocks);
        set(&mut spec.attention_heads, self.attention_heads);
        set(&mut spec.attention_layers, self.attention_layers);
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainSummary {
    pub checkpoint: String,
    pub history: String,
    pub spec: MethodSpec,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    pub final_train_acc: f64,
    pub best_val_acc: f64,
}

fn manifest_base(manifest: &Path) -> PathBuf {
    manifest.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn check_mode(method: u8, manifest: &DatasetManifest) -> CliResult<()> {
    let want = if method == 1 { FeatureMode::Transform } else { FeatureMode::Bitstream };
    if manifest.extraction.mode != want {
        return Err(NnError::GeometryMismatch(format!(
            "method {method} needs {want:?} features, manifest holds {:?}",
            manifest.extraction.mode
        ))
        .into());
    }
    Ok(())
}

/// Default history path: the checkpoint path with a `.history.csv` suffix.
pub fn history_path_for(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("history.csv")
}

pub fn geometry_from_samples(samples: &[Sample<f32>]) -> CliResult<ImageGeometry> {
    let s = samples.first().ok_or_else(|| CliError::from(NnError::EmptySplit("train".into())))?;
    let (y, u) = (s.input[0].dims(), s.input[1].dims());
    if y[0] != 2 * u[0] || y[1] != 2 * u[1] {
        return Err(NnError::GeometryMismatch(format!("Y grid {:?} is not twice the chroma grid {:?}", &y[..2], &u[..2])).into());
    }
    Ok(ImageGeometry::yuv420(8 * y[1], 8 * y[0]))
}

pub fn train_cmd(
    method: u8,
    manifest_path: &Path,
    config: &TrainConfig,
    arch: &ArchOptions,
    checkpoint: &Path,
    history: &Path,
) -> CliResult<TrainSummary> {
    let manifest = DatasetManifest::load(manifest_path)?;
    check_mode(method, &manifest)?;
    let base = manifest_base(manifest_path);
    let train_set = load_split::<f32>(&manifest, Split::Train, &base)?;
    let val_set = load_split::<f32>(&manifest, Split::Val, &base)?;
    let mut spec = MethodSpec::new(method, geometry_from_samples(&train_set)?);
    spec.num_classes = manifest.num_classes();
    spec.crop_width = manifest.extraction.crop_width;
    arch.apply(&mut spec);
    let model = build_model::<f32>(&spec, config.seed)?;
    info!("method {method}: {} parameters, {} train / {} val samples", model.parameter_count(), train_set.len(), val_set.len());
    let (best, hist) = train(model, &train_set, &val_set, config)?;
    let meta = CheckpointMeta {
        spec: spec.clone(),
        init_seed: config.seed,
        train: Some(config.clone()),
        extraction: Some(manifest.extraction),
        class_names: manifest.class_names.clone(),
    };
    save_checkpoint(checkpoint, &best, &meta)?;
    std::fs::write(history, hist.to_csv()).map_err(|e| CliError::io(history, e))?;
    let last = hist.records.last().expect("at least one epoch");
    Ok(TrainSummary {
        checkpoint: checkpoint.display().to_string(),
        history: history.display().to_string(),
        spec,
        epochs: hist.records.len(),
        best_epoch: hist.best_epoch,
        stop_reason: hist.stop_reason,
        final_train_acc: last.train_acc,
        best_val_acc: hist.records.iter().map(|r| r.val_acc).fold(f64::NAN, f64::max),
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub split: Split,
    pub count: usize,
    pub spec: MethodSpec,
    pub class_names: Vec<String>,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

pub fn eval_cmd(manifest_path: &Path, checkpoint: &Path, split: Split) -> CliResult<EvalReport> {
    let (model, meta) = load_checkpoint::<f32>(checkpoint)?;
    let manifest = DatasetManifest::load(manifest_path)?;
    check_mode(meta.spec.method_id, &manifest)?;
    if meta.spec.uses_bitstream() && manifest.extraction.crop_width != meta.spec.crop_width {
        return Err(NnError::GeometryMismatch(format!(
            "checkpoint expects crop width {}, manifest features use {}",
            meta.spec.crop_width, manifest.extraction.crop_width
        ))
        .into());
    }
    if manifest.num_classes() != meta.spec.num_classes {
        return Err(NnError::Config(format!(
            "checkpoint has {} classes, manifest {}",
            meta.spec.num_classes,
            manifest.num_classes()
        ))
        .into());
    }
    let samples = load_split::<f32>(&manifest, split, &manifest_base(manifest_path))?;
    let metrics = evaluate(&model, &samples, split.as_str())?;
    Ok(EvalReport { split, count: samples.len(), spec: meta.spec, class_names: meta.class_names, metrics })
}
