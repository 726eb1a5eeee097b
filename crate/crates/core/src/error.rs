//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tensor math, the model, the solver, and the data loaders.
#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors that must agree in shape or length do not.
    #[error("shape mismatch: {context}: {left:?} vs {right:?}")]
    ShapeMismatch {
        context: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A tensor was constructed with a NaN or infinite element.
    #[error("non-finite element at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    /// An empty shape, a zero dimension, or data/shape length disagreement.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// Model input does not match the network's input dimension.
    #[error("dimension mismatch: model expects {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A class label outside `[0, num_classes)`.
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    /// Training step or accuracy over an empty batch/dataset.
    #[error("empty {0}")]
    Empty(&'static str),

    /// Back-substitution hit a (near-)zero diagonal entry.
    #[error("singular upper-triangular system: diagonal entry {index} is {value:e}")]
    SingularDiagonal { index: usize, value: f64 },

    /// A hyperparameter outside its documented range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// IDX container with an unexpected magic number.
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    IdxBadMagic { expected: u32, found: u32 },

    /// IDX container shorter than its header promises.
    #[error("truncated IDX file: needed {needed} bytes, found {found}")]
    IdxTruncated { needed: usize, found: usize },

    /// Image and label files disagree on the example count.
    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// Checkpoint file with an unexpected header.
    #[error("bad checkpoint header: {0}")]
    CheckpointFormat(String),

    /// Underlying I/O failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
