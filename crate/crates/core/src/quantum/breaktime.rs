use super::{ExpectationSeries, QuantumError};
use crate::classical::Trajectory;

/// Relative slack allowed when the quantum samples fall just outside the
/// classical time range.
const RESAMPLE_TOLERANCE: f64 = 1e-9;

/// Linear interpolation of the classical positions at time `t`.
pub fn classical_position_at(traj: &Trajectory, t: f64) -> Option<[f64; 2]> {
    let n = traj.len();
    if n == 0 {
        return None;
    }
    let (t0, t1) = (traj.t[0], traj.t[n - 1]);
    let slack = RESAMPLE_TOLERANCE * (t1 - t0).abs().max(1.0);
    if t < t0 - slack || t > t1 + slack {
        return None;
    }
    if n == 1 {
        return Some(traj.z[0].q());
    }
    let k = match traj.t.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(k) => return Some(traj.z[k].q()),
        Err(k) => k.clamp(1, n - 1),
    };
    let (ta, tb) = (traj.t[k - 1], traj.t[k]);
    let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
    let (a, b) = (traj.z[k - 1].q(), traj.z[k].q());
    Some([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])])
}

/// `|⟨q⟩(t) − q_classical(t)|` on the quantum sample times.
pub fn ehrenfest_deviation(qseries: &ExpectationSeries, traj: &Trajectory) -> Result<Vec<f64>, QuantumError> {
    qseries
        .t
        .iter()
        .zip(&qseries.mean_q)
        .map(|(t, q)| {
            let c = classical_position_at(traj, *t).ok_or_else(|| {
                QuantumError::GridMismatch(format!(
                    "quantum sample t = {t} outside classical range [{}, {}]",
                    traj.t.first().copied().unwrap_or(f64::NAN),
                    traj.t.last().copied().unwrap_or(f64::NAN)
                ))
            })?;
            Ok((q[0] - c[0]).hypot(q[1] - c[1]))
        })
        .collect()
}

/// First time the quantum mean departs from the classical orbit by more than
/// `threshold`, interpolated linearly between samples. `None` when it stays
/// within threshold over the whole series.
pub fn ehrenfest_break_time(
    qseries: &ExpectationSeries,
    traj: &Trajectory,
    threshold: f64,
) -> Result<Option<f64>, QuantumError> {
    if !(threshold > 0.0) {
        return Err(QuantumError::InvalidArgument(format!("threshold must be > 0 (got {threshold})")));
    }
    let dev = ehrenfest_deviation(qseries, traj)?;
    let Some(k) = dev.iter().position(|d| *d > threshold) else {
        return Ok(None);
    };
    if k == 0 {
        return Ok(Some(qseries.t[0]));
    }
    let (da, db) = (dev[k - 1], dev[k]);
    let (ta, tb) = (qseries.t[k - 1], qseries.t[k]);
    Ok(Some(ta + (threshold - da) / (db - da) * (tb - ta)))
}
