//! Simulation and verification toolkit for the damped and forced
//! Ablowitz-Ladik lattice and the damped and forced discrete nonlinear
//! Schrödinger lattice.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod lattice;
pub mod sampling;

pub use error::{Error, Result};
pub use lattice::{BallSpec, Boundary, Forcing, ForcingFamily, LatticeState, ModelParams};
