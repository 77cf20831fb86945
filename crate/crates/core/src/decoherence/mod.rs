//! Decoherence exponent, the product-ansatz error functional, and the
//! regular-versus-chaotic comparison.

mod compare;
mod exponent;
mod hartree;
pub mod special;

use thiserror::Error;

use crate::bath::BathError;
use crate::classical::FitError;

pub use compare::{compare_regimes, ComparisonReport, RegimeRun};
pub use exponent::{asymptotic_exponent, DecoherenceSeries, Engine, ExponentSource};
pub use hartree::{hartree_error, weight_integral_closed_form, weight_w, HartreeErrorEstimate, OMEGA_FLOOR};

#[derive(Debug, Error)]
pub enum DecoherenceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("series ends at t = {have} but t = {needed} was requested")]
    SeriesTooShort { needed: f64, have: f64 },
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Fit(#[from] FitError),
}
