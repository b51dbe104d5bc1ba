//! Minimal dense reverse-mode differentiation over `f64` matrices.
//!
//! A [`Tape`] records one forward computation. Parameters live outside the
//! tape in a [`ParamStore`] and are bound to leaves with [`Tape::param`];
//! after [`Tape::backward`] their gradients are read with
//! [`Tape::param_grads`]. Shapes must match exactly except for scalar
//! scaling; [`Tape::repeat_rows`] is the only explicit broadcast.

mod gradcheck;
mod matrix;
mod params;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use matrix::Matrix;
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};
