//! Minimal reverse-mode automatic differentiation over dense tensors.
//!
//! The engine is just large enough to express a small decoder-only
//! transformer and to produce per-example gradients for private training.

mod backward;
pub mod gradcheck;
mod graph;
mod params;
mod per_example;
mod tensor;

use thiserror::Error;

pub use graph::{Graph, NodeId};
pub(crate) use graph::{causal_row_softmax, gelu_value};
pub use params::{ParamId, ParamSpec, ParamStore};
pub use per_example::{
    batch_mean_gradient, for_each_example_gradient, per_example_gradients, ExampleLoss,
};
pub use tensor::{Real, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{op}: expected a matrix, got shape {shape:?}")]
    NotAMatrix { op: &'static str, shape: Vec<usize> },
    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}
