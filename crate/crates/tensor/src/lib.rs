//! A small dense-tensor reverse-mode automatic differentiation engine.
//!
//! Values are row-major `f64` arrays. A [`Tape`] records operations on
//! [`Var`] handles; [`Tape::backward`] runs once and yields gradients for the
//! parameters in a [`ParamStore`] and for any recorded variable. Every op
//! checks its output for NaN/Inf and fails with [`TensorError::NonFinite`]
//! instead of recording it.

mod ops;
mod optim;
mod params;
mod tape;
mod tensor;

pub use ops::MASKED;
pub use optim::{clip_grad_norm, Adam};
pub use params::{ParamGrads, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("invalid argument to {op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("non-finite value produced by {op} (node {node})")]
    NonFinite { op: &'static str, node: usize },
    #[error("non-finite gradient flowing out of {op} (node {node})")]
    NonFiniteGradient { op: &'static str, node: usize },
    #[error("backward already ran on this tape")]
    BackwardTwice,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
}

pub type Result<T> = std::result::Result<T, TensorError>;
