//! Automatic differentiation.
//!
//! Three layers share one elementary-operation set (add, sub, mul, div, pow,
//! exp, ln, sin, cos, tanh, softplus):
//!
//! * [`Dual`] numbers for forward mode, nestable for higher derivatives.
//! * The scalar [`Tape`] for reverse mode and forward-over-reverse Hessians.
//! * [`BatchTape`], the same operations lifted over a batch of points, used
//!   by the trainer.

mod batch;
mod dual;
mod real;
mod tape;

pub use batch::{BatchTape, ParamGrads, TensorId};
pub use dual::Dual;
pub use real::{sigmoid, softplus, Real};
pub use tape::{
    forward_eval, hessian_column, reverse_gradient, second_derivative, Expr, Gradient, NodeId, Op,
    Tape, Var,
};
