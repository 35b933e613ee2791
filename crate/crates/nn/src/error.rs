use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("ShapeMismatch in {op}: expected {expected}, found {found}")]
    ShapeMismatch { op: &'static str, expected: String, found: String },
    #[error("GeometryMismatch: {0}")]
    GeometryMismatch(String),
    #[error("NonFiniteLoss at epoch {epoch}, sample {sample}")]
    NonFiniteLoss { epoch: usize, sample: usize },
    #[error("FeatureIoError: {0}")]
    FeatureIo(String),
    #[error("ClassTooSmall: class {class} has {count} items (need at least 3)")]
    ClassTooSmall { class: String, count: usize },
    #[error("EmptySplit: no items in the {0} split")]
    EmptySplit(String),
    #[error("Checkpoint: {0}")]
    Checkpoint(String),
    #[error("Config: {0}")]
    Config(String),
}

impl NnError {
    pub fn shape(op: &'static str, expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> Self {
        NnError::ShapeMismatch { op, expected: format!("{expected:?}"), found: format!("{found:?}") }
    }
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
