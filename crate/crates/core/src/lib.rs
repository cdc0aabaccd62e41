//! Penalty-projection enforcement of boundary conditions and linear
//! constraints for linear evolution equations.
//!
//! A constrained problem `v' = A0(t) v + b(t)`, `P v = 0` is replaced by the
//! unconstrained penalized system `v' = A0(t) v - i λ P v + b(t)`. The crate
//! builds grids, generators and projectors, integrates the penalized system
//! (directly or in the projector's interaction frame), measures constraint
//! errors against the analytic penalty bounds, emulates the fast-forwarded
//! projector circuits on a small statevector, and evaluates the associated
//! resource formulas.

pub mod circuits;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod homogenize;
pub mod integrator;
pub mod io;
pub mod kubo;
pub mod linalg;
pub mod operators;
pub mod penalty;
pub mod projectors;
pub mod resources;
pub mod scenarios;

pub use error::{Error, Result};
pub use linalg::C64;
