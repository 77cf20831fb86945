//! Grid wavepackets evolved under the bare system Hamiltonian.

mod breaktime;
mod grid;
mod wavepacket;

use thiserror::Error;

pub use breaktime::{classical_position_at, ehrenfest_break_time, ehrenfest_deviation};
pub use grid::Grid2D;
pub use wavepacket::{
    init_gaussian, propagate_wavepacket, write_snapshot, ExpectationSeries, SplitOperator, WavepacketState,
    EDGE_DENSITY_LIMIT, NORM_DRIFT_LIMIT,
};

/// Default break-time threshold as a fraction of the energy-shell diameter.
pub const BREAK_THRESHOLD_FRACTION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid packet width: {0}")]
    InvalidWidth(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("wavepacket reached the box edge at t = {t} (edge density {edge_density:e})")]
    BoundaryLeak { t: f64, edge_density: f64, partial: Box<ExpectationSeries> },
    #[error("norm drift {drift:e} at t = {t}")]
    NormDrift { t: f64, drift: f64, partial: Box<ExpectationSeries> },
    #[error("time grid mismatch: {0}")]
    GridMismatch(String),
}
