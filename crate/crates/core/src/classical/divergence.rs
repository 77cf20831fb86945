use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use super::{seeded_direction, DynamicsError, Propagator, Trajectory};
use crate::models::{HamiltonianModel, PhasePoint};

/// Running integral `D(t) = ∫₀ᵗ |q(τ, z+δz) − q(τ, z)|² dτ` of two adjacent orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSeries {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    /// Position separation `|Δq|` per sample.
    pub separation: Vec<f64>,
    /// Relative energy drift of the reference orbit.
    pub energy_drift: Vec<f64>,
    /// Position difference `q(z+δz) − q(z)` per sample.
    pub dq: Vec<[f64; 2]>,
}

impl DivergenceSeries {
    /// Builds the series from two orbits sampled on the same grid.
    ///
    /// The quadrature is the trapezoid rule with its Euler-Maclaurin end
    /// correction, using the exact derivative `d|Δq|²/dt = 2 Δq·Δp / m`;
    /// cubic integrands are integrated exactly.
    pub fn from_trajectories(reference: &Trajectory, other: &Trajectory, mass: f64) -> Self {
        let n = reference.len().min(other.len());
        let t = reference.t[..n].to_vec();
        let mut dq = Vec::with_capacity(n);
        let mut f = Vec::with_capacity(n);
        let mut fprime = Vec::with_capacity(n);
        for (a, b) in reference.z[..n].iter().zip(&other.z[..n]) {
            let diff = *b - *a;
            dq.push([diff.qx, diff.qy]);
            f.push(diff.qx * diff.qx + diff.qy * diff.qy);
            fprime.push(2.0 * (diff.qx * diff.px + diff.qy * diff.py) / mass);
        }
        let mut d = Vec::with_capacity(n);
        let mut acc = 0.0;
        d.push(0.0);
        for i in 1..n {
            let h = t[i] - t[i - 1];
            acc += 0.5 * h * (f[i - 1] + f[i]) - h * h / 12.0 * (fprime[i] - fprime[i - 1]);
            d.push(acc);
        }
        let mut energy_drift = reference.energy_drift();
        energy_drift.truncate(n);
        Self { separation: f.iter().map(|x| x.sqrt()).collect(), t, d, energy_drift, dq }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// First sample time at which the separation exceeds `threshold`.
    pub fn first_exceeding(&self, threshold: f64) -> Option<f64> {
        self.separation.iter().position(|s| *s > threshold).map(|i| self.t[i])
    }
}

pub fn divergence_integral(
    model: &HamiltonianModel,
    z0: PhasePoint,
    delta_z: PhasePoint,
    dt: f64,
    n_steps: usize,
) -> Result<DivergenceSeries, DynamicsError> {
    divergence_integral_with(&Propagator::new(*model, dt), z0, delta_z, n_steps)
}

pub fn divergence_integral_with(
    prop: &Propagator,
    z0: PhasePoint,
    delta_z: PhasePoint,
    n_steps: usize,
) -> Result<DivergenceSeries, DynamicsError> {
    let a = prop.propagate(z0, n_steps)?;
    let b = prop.propagate(z0 + delta_z, n_steps)?;
    Ok(DivergenceSeries::from_trajectories(&a, &b, prop.model.mass))
}

/// Geometric ensemble mean of divergence integrals.
///
/// Member `k` starts on the reference orbit of `z0` after `k * spacing_steps`
/// steps, displaced by `delta * seeded_direction(seed + k)`. `d` and
/// `separation` are geometric means over members; `dq` and `energy_drift` are
/// those of member 0. Members run in parallel; the reduction is in member order.
pub fn ensemble_divergence(
    prop: &Propagator,
    z0: PhasePoint,
    delta: f64,
    members: usize,
    spacing_steps: usize,
    n_steps: usize,
    seed: u64,
) -> Result<DivergenceSeries, DynamicsError> {
    if members == 0 || spacing_steps == 0 || !(delta > 0.0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "ensemble needs members, spacing, delta > 0 (got {members}, {spacing_steps}, {delta})"
        )));
    }
    let starts = Propagator { sample_every: spacing_steps, ..*prop }.propagate(z0, spacing_steps * (members - 1))?;
    let runs: Vec<DivergenceSeries> = (0..members)
        .into_par_iter()
        .map(|k| {
            let dz = seeded_direction(seed.wrapping_add(k as u64)) * delta;
            divergence_integral_with(prop, starts.z[k], dz, n_steps)
        })
        .collect::<Result<_, _>>()?;
    let n = runs.iter().map(DivergenceSeries::len).min().unwrap_or(0);
    let inv = 1.0 / members as f64;
    let mut log_d = vec![0.0; n];
    let mut log_s = vec![0.0; n];
    for run in &runs {
        for i in 0..n {
            log_d[i] += run.d[i].ln();
            log_s[i] += run.separation[i].ln();
        }
    }
    let first = &runs[0];
    Ok(DivergenceSeries {
        t: first.t[..n].to_vec(),
        d: log_d.iter().map(|x| (x * inv).exp()).collect(),
        separation: log_s.iter().map(|x| (x * inv).exp()).collect(),
        energy_drift: first.energy_drift[..n].to_vec(),
        dq: first.dq[..n].to_vec(),
    })
}

/// Largest relative phase-space mismatch between the finite separation of two
/// orbits and the linearized (tangent-map) separation, over the samples where
/// the finite separation stays below `1e-3 * orbit_scale`.
pub fn linearization_mismatch(
    prop: &Propagator,
    z0: PhasePoint,
    delta_z: PhasePoint,
    n_steps: usize,
    orbit_scale: f64,
) -> Result<f64, DynamicsError> {
    let a = prop.propagate(z0, n_steps)?;
    let b = prop.propagate(z0 + delta_z, n_steps)?;
    let lin = prop.propagate_tangent(z0, delta_z, n_steps)?;
    let mut worst: f64 = 0.0;
    for ((za, zb), v) in a.z.iter().zip(&b.z).zip(&lin.v) {
        let finite = *zb - *za;
        if finite.norm() >= 1e-3 * orbit_scale {
            break;
        }
        worst = worst.max((finite - *v).norm() / v.norm());
    }
    Ok(worst)
}
