//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records primitives as they are evaluated; [`Tape::backward`]
//! sweeps it in reverse and accumulates adjoints additively over fan-out.

mod gradcheck;
mod nn;
mod tape;
mod tensor;

pub use gradcheck::{gradient_check, RandomGraph};
pub use nn::{glorot_uniform, sgd_step, Bound, Linear, Mlp, Optimizer, OptimizerKind, ParamId, ParamStore, PRELU_INIT};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
