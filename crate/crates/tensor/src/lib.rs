//! Dense `f64` tensors with a reverse-mode gradient tape.
//!
//! Values are immutable once produced. Shapes must match exactly for binary
//! operations; the only broadcast is against a plain `f64` scalar.

mod error;
pub mod fd;
pub mod io;
mod kernels;
pub mod ops;
mod sparse;
mod tape;
mod tensor;

pub use error::TensorError;
pub use fd::{finite_difference_gradient, max_relative_error};
pub use kernels::ConvGeom;
pub use ops::ElementwiseKind;
pub use sparse::SparseMap;
pub use tape::{Gradients, ReduceKind, Tape, Unary, Var};
pub use tensor::Tensor;
