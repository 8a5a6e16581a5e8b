use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("pixel value {value} at index {index} outside [0, {max}]")]
    PixelOutOfRange { index: usize, value: f64, max: f64 },

    #[error("per-step spike probability {0} exceeds 1")]
    ProbabilityTooLarge(f64),

    #[error("plasticity mode {mode} is inconsistent with frozen flags: {reason}")]
    PlasticityMode { mode: &'static str, reason: &'static str },

    #[error("{0}")]
    Idx(#[from] IdxError),

    #[error("{0}")]
    Checkpoint(#[from] CheckpointError),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad IDX magic {found:#010x} (expected {expected:#010x})")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated IDX file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated checkpoint")]
    Truncated,
    #[error("missing array `{0}`")]
    MissingArray(String),
    #[error("array `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}
