//! Dense tensors and reverse-mode automatic differentiation.

mod dense;
pub mod gradcheck;
mod graph;
mod params;

use thiserror::Error;

pub use dense::{Real, Tensor};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckEntry, GradCheckOptions, GradCheckReport, Stencil};
pub use graph::{cross_entropy, sigmoid, softmax_in_place, Graph, Var, PROB_FLOOR};
pub use params::{Gradients, ParamId, ParamSet, Parameter};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: index {index} out of range for length {len}")]
    Index { op: &'static str, index: usize, len: usize },

    #[error("{0}: produced a non-finite value")]
    NonFinite(&'static str),

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("{0}: no inputs")]
    Empty(&'static str),

    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),

    #[error("duplicate parameter name {0:?}")]
    DuplicateParameter(String),
}
