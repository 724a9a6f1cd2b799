//! Numerical kernel for the two-scale sand-transport model on a periodic
//! domain: grid operators, closures and wind, the stiff parabolic solver,
//! the periodic cell problem and the two-scale diagnostics.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cell;
pub mod error;
pub mod field_io;
pub mod grid;
pub mod physics;
pub mod solver;

pub use error::{Error, Result};
