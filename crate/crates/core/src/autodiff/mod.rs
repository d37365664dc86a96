//! Reverse-mode automatic differentiation over dense arrays.

mod check;
mod tape;

pub use check::{check_gradient, numeric_gradient};
pub use tape::{Gradients, Node, Op, Tape, Var, LEAKY_SLOPE};
