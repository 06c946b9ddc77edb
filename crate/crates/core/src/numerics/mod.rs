//! Linear algebra and differentiation substrate.
//!
//! All values are `f64`, stored row-major. Kernels are serial with a fixed
//! reduction order, so identical inputs give bitwise identical outputs.

mod dense;
mod optim;
mod sparse;
mod tape;

pub use dense::DenseMatrix;
pub use optim::{AdamConfig, ParamId, ParamStore};
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};
