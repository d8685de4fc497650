//! Dense linear algebra, reverse-mode differentiation, Adam, and gradient
//! validation. Everything is 64-bit and deterministic given identical inputs.
//!
//! Kernels are pure functions on [`Tensor2`]; training flows through the
//! recorded graph in [`autodiff`]. Forward passes on distinct data are safe
//! to run concurrently; parameter mutation (optimizer steps, gradient
//! accumulation) is single-writer.

pub mod autodiff;
pub mod gradcheck;
pub mod optim;
pub mod tensor;

pub use autodiff::{Binding, ParamId, ParamStore, Parameter, Tape, Var};
pub use gradcheck::{finite_difference_check, GradCheckReport, FD_STEP};
pub use optim::AdamState;
pub use tensor::{
    attention, layer_norm, matmul, sinusoidal_positions, softmax_rows, Tensor2, LAYER_NORM_EPS,
};
