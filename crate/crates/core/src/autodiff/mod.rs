//! Dense tensors with reverse-mode automatic differentiation.
//!
//! The graph is a define-by-run tape: every forward op appends a node with
//! its saved value, inputs always have smaller ids than their outputs, and
//! [`Graph::backward`] walks the tape in reverse accumulating gradients by
//! sum over all paths.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, GradCheckSettings, TensorCheck};
pub use graph::{Gradients, Graph, NodeId};
pub use tensor::{Dtype, Real, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {shapes:?}")]
    ShapeMismatch {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },

    #[error("{op}: expected a matrix, got shape {shape:?}")]
    NotAMatrix {
        op: &'static str,
        shape: Vec<usize>,
    },

    #[error("ln: non-positive input {value} at flat index {index}")]
    LogDomain { value: f64, index: usize },

    #[error("{op}: row index {index} out of range for a table with {rows} rows")]
    RowOutOfRange {
        op: &'static str,
        index: usize,
        rows: usize,
    },

    #[error("{op}: column range {from}..{to} invalid for width {width}")]
    BadSlice {
        op: &'static str,
        from: usize,
        to: usize,
        width: usize,
    },

    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },

    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataShapeMismatch { len: usize, shape: Vec<usize> },

    #[error("shape {shape:?} contains a zero dimension")]
    ZeroDim { shape: Vec<usize> },

    #[error("backward requires a scalar root, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },

    #[error("backward was already run on this graph; build a fresh graph instead")]
    BackwardAlreadyRun,

    #[error("{context}: non-finite value {value} at flat index {index}")]
    NonFinite {
        context: String,
        value: f64,
        index: usize,
    },
}
