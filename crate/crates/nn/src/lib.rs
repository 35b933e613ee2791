//! Layers, classifiers and training for compressed-domain JPEG features.
//!
//! Tensors are generic over [`Real`] (`f32` or `f64`); every reduction
//! accumulates in `f64`. Gradients are computed by hand-written backward
//! passes over a fixed layer graph.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta};
pub use dataset::{load_split, split_counts, split_dataset, DatasetManifest, ManifestEntry, Sample, Split};
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, Differentiable, GradCheckOptions, GradReport, LayerProbe, ModelProbe};
pub use layers::{Layer, LayerKind};
pub use metrics::{ClassMetrics, MetricsReport};
pub use models::{argmax, build_model, input_from_features, TRANSFORM_INPUT_SCALE, MethodSpec, Model, ModelInput};
pub use optim::{adam_step, Adam, Moments, TrainConfig};
pub use scalar::Real;
pub use tensor::Tensor;
pub use train::{evaluate, train, EarlyStopping, EpochRecord, History, StopReason};
