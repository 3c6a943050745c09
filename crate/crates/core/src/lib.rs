//! Completely positive tensor detection and nonnegative decomposition.
//!
//! A symmetric tensor is completely positive when it is a finite sum of
//! outer powers of nonnegative vectors. This crate decides membership by a
//! hierarchy of semidefinite relaxations of the associated truncated moment
//! problem over `K = {x : ‖x‖ = 1, x ≥ 0}`: an infeasible level yields a
//! dual certificate, and a flat optimal moment sequence yields atoms of a
//! nonnegative decomposition.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod fixtures;
pub mod generate;
pub mod io;
pub mod extraction;
pub mod linalg;
pub mod multiindex;
pub mod pipeline;
pub mod refine;
pub mod relaxation;
pub mod sdp;
mod serde_float;
pub mod moment;
pub mod tensor;

pub use error::{Error, Result};
