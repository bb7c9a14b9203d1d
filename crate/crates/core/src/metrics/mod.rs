//! Classification quality measurement: per-class precision/recall/F1 with
//! macro, micro, and support-weighted averages; confusion-fraction
//! matrices and their difference heatmaps; per-group F1 against training
//! support.

pub mod confusion;
pub mod f1;
pub mod report;

pub use confusion::{
    confusion_fraction, heatmap_diff, per_group_f1_vs_support, ConfusionFraction, HeatmapDiff,
};
pub use f1::{f1_scores, ClassStats, MetricsReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {preds} predictions vs {truths} truths")]
    LengthMismatch { preds: usize, truths: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("matrix shape mismatch: {a_rows}x{a_cols} vs {b_rows}x{b_cols}")]
    ShapeMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
}
