//! Decoherence of two adjacent wavepackets coupled to a thermal dipole bath,
//! compared between regular and chaotic two-dimensional dynamics.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod classical;
pub mod decoherence;
pub mod harness;
pub mod models;
pub mod quantum;

pub use models::{Family, HamiltonianModel, ModelError, PhasePoint};
