//! Minimal reverse-mode differentiation over dense row-major matrices.
//!
//! Values are recorded on a [`Tape`] as they are computed. Trainable tensors
//! live in a [`ParamStore`] and enter a tape through [`Tape::param`]; every
//! other input is a constant. [`Tape::backward`] walks the tape once in
//! reverse and returns one gradient per stored parameter. A tape is built per
//! forward pass and dropped afterwards.

mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::{central_difference, grad_check};
pub use optim::{clip_grad_norm, RmsProp, RmsPropConfig};
pub use tape::{Axis, Gradients, Tape, Var};
pub use tensor::{ParamId, ParamStore, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: [usize; 2],
        rhs: [usize; 2],
    },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadLength { shape: [usize; 2], len: usize },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss([usize; 2]),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("index {index} out of range for {op} (bound {bound})")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
}
