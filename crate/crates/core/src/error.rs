//! Crate-level error type. Module-specific errors (`autodiff`, `data`,
//! `metrics`) convert into this for the higher layers.

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::data::DataError;
use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),

    #[error("unknown parameter {0:?}")]
    UnknownParam(String),

    #[error("missing gradient for parameter {0:?}")]
    MissingGradient(String),

    #[error("parameter {name:?}: expected shape {expected:?}, found {found:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("example {index}: category {category} is not the parent of group {group}")]
    HierarchyMismatch {
        index: usize,
        category: usize,
        group: usize,
    },

    #[error("example {index}: the {variant} model requires a category label")]
    MissingCategory { index: usize, variant: String },

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NanLoss { epoch: usize, step: usize },

    #[error("KL term {value} below the -1e-9 floor at epoch {epoch}, step {step}")]
    NegativeKl {
        value: f64,
        epoch: usize,
        step: usize,
    },

    #[error("checkpoint: bad magic bytes")]
    BadMagic,

    #[error("checkpoint: dtype is {found}, expected {expected}")]
    DtypeMismatch { expected: String, found: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("gradient check failed: max relative error {max_rel_err:.3e} exceeds tolerance {tolerance:.3e}")]
    GradCheckFailed { max_rel_err: f64, tolerance: f64 },

    #[error("gradient check: loss is not deterministic under a fixed seed ({first} vs {second})")]
    NonDeterministicLoss { first: f64, second: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
