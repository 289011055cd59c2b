//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] is built fresh for every forward pass. Operations append nodes
//! in evaluation order and [`Tape::backward`] walks them in reverse,
//! accumulating vector-Jacobian products. Trainable values live in a
//! [`ParamSet`]; the tape borrows it, so parameters are never copied.

mod check;
mod tape;
mod tensor;

pub use check::{finite_difference_check, Coordinates, GradCheckReport};
pub use tape::{sigmoid, softmax, ElementwiseOp, Tape, Var};
pub use tensor::{Gradients, ParamId, ParamSet, Tensor};
