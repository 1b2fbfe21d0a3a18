//! Dense-matrix reverse-mode differentiation.
//!
//! Values are computed eagerly as ops are recorded on a [`Tape`]; a call to
//! [`Tape::backward`] sweeps the tape once in reverse. Gradients accumulate
//! across passes until [`Tape::reset_grads`].

pub mod gradcheck;
mod sparse;
mod tape;

pub use sparse::SparseMatrix;
pub use tape::{DiffNode, Op, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: index out of range for shape {shape:?}")]
    OutOfRange { op: &'static str, shape: (usize, usize) },
    #[error("label out of range for {classes} classes")]
    LabelOutOfRange { classes: usize },
    #[error("backward needs a 1x1 output, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("variable does not belong to this tape")]
    ForeignVar,
    #[error("node {0} has no gradient (not differentiable or backward not run)")]
    NoGradient(usize),
}
