//! Dense-matrix reverse-mode differentiation.
//!
//! A [`Tape`] records one forward pass over a fixed set of primitives
//! (matrix products, elementwise arithmetic, concatenation, row means and
//! neighbor means, `tanh`/`sigmoid`/`log σ`, row softmax and inner products).
//! [`Tape::backward`] then walks the record in exact reverse order and adds
//! parameter gradients into a [`ParamStore`]. [`grad_check`] compares those
//! gradients against central differences.

mod check;
mod params;
mod tape;
mod tensor;

pub use check::{grad_check, Differentiable, TapeObjective};
pub use params::{ParamCheckpoint, ParamId, ParamStore, Parameter, CHECKPOINT_FORMAT_VERSION};
pub use tape::{log_sigmoid, sigmoid, RowGroups, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{0}: produced a non-finite value")]
    NonFinite(&'static str),
    #[error("{0}: empty operand")]
    Empty(&'static str),
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("tensor data of length {len} does not fit shape {rows}x{cols}")]
    BadData { rows: usize, cols: usize, len: usize },
    #[error("duplicate parameter name {0:?}")]
    DuplicateParameter(String),
    #[error("finite-difference epsilon {0} outside [1e-7, 1e-3]")]
    InvalidEpsilon(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
