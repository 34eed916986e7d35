//! Optimal consensus control for first- and second-order swarm models
//! constrained to the unit sphere.
//!
//! The forward models are integrated with RK4, gradients come from the
//! discrete-consistent costate equations, and controls are optimized with
//! Barzilai-Borwein descent. See the `swarmctl` binary for the command-line
//! front end.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod integrate;
pub mod objective;
pub mod optimizer;
pub mod output;

pub use error::{Error, Result};
