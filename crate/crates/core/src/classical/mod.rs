//! Classical orbits, tangent dynamics, Lyapunov exponents and the
//! adjacent-orbit divergence integral.

mod divergence;
mod integrator;
mod lyapunov;
mod scaling;

use thiserror::Error;

use crate::models::{ModelError, PhasePoint};

pub use divergence::{divergence_integral, divergence_integral_with, ensemble_divergence, linearization_mismatch, DivergenceSeries};
pub use integrator::{propagate, propagate_tangent, Propagator, TangentSeries, Trajectory, DEFAULT_ESCAPE_RADIUS};
pub use lyapunov::{max_lyapunov, max_lyapunov_with, seeded_direction, LyapunovEstimate};
pub use scaling::{
    classify_scaling, fit_line, FitError, LineFit, ScalingFit, ScalingKind, AMBIGUITY_GAP, MIN_FIT_SAMPLES,
    SATURATION_FRACTION, TRANSIENT_PERIODS,
};

/// Default integrator step.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("orbit escaped at t = {escaped_at}; last valid sample at t = {t}: {last:?}")]
    Escape { t: f64, last: PhasePoint, escaped_at: f64 },
    #[error("relative energy drift {drift:e} exceeds bound {bound:e} at t = {t}")]
    EnergyDrift { t: f64, drift: f64, bound: f64 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
