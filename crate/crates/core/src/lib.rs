//! Time-parallel solvers for implicit-Euler discretizations of linear
//! parabolic problems.
//!
//! The time-global system `B u = f` is rewritten as a symmetric saddle-point
//! problem and solved by an inexact Uzawa iteration (or MINRES) whose Schur
//! complement preconditioner is block-diagonalized in time by a discrete
//! sine transform. Each preconditioner application costs a pair of fast
//! transforms plus `N` independent spatial solves.

pub mod dst;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod schur;
pub mod solvers;
pub mod spatial;

pub use error::{Error, Result};
