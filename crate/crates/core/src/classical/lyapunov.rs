use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Propagator};
use crate::models::{HamiltonianModel, PhasePoint};

/// Largest Lyapunov exponent with its running estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    /// `(T, λ(T))` after each renormalization.
    pub convergence: Vec<(f64, f64)>,
    pub renorm_interval: f64,
    pub total_time: f64,
}

/// Random unit tangent vector drawn from `seed`.
pub fn seeded_direction(seed: u64) -> PhasePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = PhasePoint::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// Benettin estimate: propagate one tangent vector with the orbit, rescale it
/// to unit length every `renorm_interval`, and average the log stretch factors.
pub fn max_lyapunov(
    model: &HamiltonianModel,
    z0: PhasePoint,
    dt: f64,
    total_time: f64,
    renorm_interval: f64,
    seed: u64,
) -> Result<LyapunovEstimate, DynamicsError> {
    max_lyapunov_with(&Propagator::new(*model, dt), z0, total_time, renorm_interval, seed)
}

pub fn max_lyapunov_with(
    prop: &Propagator,
    z0: PhasePoint,
    total_time: f64,
    renorm_interval: f64,
    seed: u64,
) -> Result<LyapunovEstimate, DynamicsError> {
    let dt = prop.dt;
    if !(dt > 0.0 && renorm_interval >= dt && total_time >= renorm_interval) {
        return Err(DynamicsError::InvalidArgument(format!(
            "need total_time >= renorm_interval >= dt > 0 (got {total_time}, {renorm_interval}, {dt})"
        )));
    }
    let steps_per_renorm = (renorm_interval / dt).round().max(1.0) as usize;
    let n_renorm = (total_time / (steps_per_renorm as f64 * dt)).round().max(1.0) as usize;

    let mut z = z0;
    let mut v = [seeded_direction(seed)];
    let mut log_sum = 0.0;
    let mut convergence = Vec::with_capacity(n_renorm);
    let mut step = 0usize;
    for _ in 0..n_renorm {
        for _ in 0..steps_per_renorm {
            let last = z;
            prop.step_with_tangents(&mut z, &mut v, dt);
            step += 1;
            if !z.is_finite() || z.position_norm() > prop.escape_radius {
                return Err(DynamicsError::Escape {
                    t: (step - 1) as f64 * dt,
                    last,
                    escaped_at: step as f64 * dt,
                });
            }
        }
        let norm = v[0].norm();
        log_sum += norm.ln();
        v[0] = v[0] * (1.0 / norm);
        let t = step as f64 * dt;
        convergence.push((t, log_sum / t));
    }
    let lambda_max = convergence.last().map(|c| c.1).unwrap_or(0.0);
    Ok(LyapunovEstimate {
        lambda_max,
        convergence,
        renorm_interval: steps_per_renorm as f64 * dt,
        total_time: step as f64 * dt,
    })
}
