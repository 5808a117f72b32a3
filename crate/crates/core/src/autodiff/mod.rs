//! Minimal reverse-mode differentiation: tensors, a recording tape, a handful of
//! layers, Adam, and a finite-difference gradient checker.

mod adam;
mod gradcheck;
pub mod nn;
mod store;
mod tape;
mod tensor;

pub use adam::Adam;
pub use gradcheck::{gradient_check, gradient_check_sampled};
pub use store::{ParamId, ParameterStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
