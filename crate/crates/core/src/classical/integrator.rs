use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::models::{HamiltonianModel, PhasePoint};

/// Default radius beyond which an orbit counts as escaped.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1.0e3;

/// Fourth-order Suzuki composition `S(p) S(p) S(1-4p) S(p) S(p)` of the
/// kick-drift-kick leapfrog. Symmetric, hence time-reversible.
fn suzuki_weights() -> [f64; 5] {
    let p = 1.0 / (4.0 - 4f64.powf(1.0 / 3.0));
    [p, p, 1.0 - 4.0 * p, p, p]
}

/// Sampled classical orbit on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub z: Vec<PhasePoint>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> Option<&PhasePoint> {
        self.z.last()
    }

    /// `|E(t) - E(0)| / |E(0)|`, or the absolute drift when `E(0) = 0`.
    pub fn energy_drift(&self) -> Vec<f64> {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
        self.energy.iter().map(|e| (e - e0).abs() / scale).collect()
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift().into_iter().fold(0.0, f64::max)
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.z.iter().map(PhasePoint::q).collect()
    }

    /// Average spacing of upward crossings of `qx` through its mean, if at
    /// least two are seen.
    pub fn estimate_period(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for coord in 0..2 {
            let xs: Vec<f64> = self.z.iter().map(|z| z.q()[coord]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let mut crossings = Vec::new();
            for i in 1..xs.len() {
                let (a, b) = (xs[i - 1] - mean, xs[i] - mean);
                if a < 0.0 && b >= 0.0 {
                    let frac = a / (a - b);
                    crossings.push(self.t[i - 1] + frac * (self.t[i] - self.t[i - 1]));
                }
            }
            if crossings.len() >= 2 {
                let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
                best = Some(best.map_or(period, |b: f64| b.max(period)));
            }
        }
        best
    }
}

/// Tangent vectors sampled alongside their reference orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSeries {
    pub t: Vec<f64>,
    pub z: Vec<PhasePoint>,
    pub v: Vec<PhasePoint>,
}

impl TangentSeries {
    pub fn norms(&self) -> Vec<f64> {
        self.v.iter().map(PhasePoint::norm).collect()
    }
}

/// Fixed-step symplectic propagator for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub model: HamiltonianModel,
    pub dt: f64,
    pub escape_radius: f64,
    /// Relative energy drift that aborts a run, if set.
    pub energy_drift_bound: Option<f64>,
    pub sample_every: usize,
}

impl Propagator {
    pub fn new(model: HamiltonianModel, dt: f64) -> Self {
        Self {
            model,
            dt,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            energy_drift_bound: None,
            sample_every: 1,
        }
    }

    pub fn with_escape_radius(mut self, r: f64) -> Self {
        self.escape_radius = r;
        self
    }

    pub fn with_energy_drift_bound(mut self, bound: f64) -> Self {
        self.energy_drift_bound = Some(bound);
        self
    }

    pub fn with_sample_every(mut self, every: usize) -> Self {
        self.sample_every = every.max(1);
        self
    }

    fn check_args(&self, n_steps: usize) -> Result<(), DynamicsError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DynamicsError::InvalidArgument(format!("dt must be > 0 (got {})", self.dt)));
        }
        if n_steps == 0 {
            return Err(DynamicsError::InvalidArgument("n_steps must be >= 1".into()));
        }
        Ok(())
    }

    /// One composed step of size `dt` (negative `dt` runs backwards).
    pub(crate) fn step(&self, z: &mut PhasePoint, dt: f64) {
        let inv_m = 1.0 / self.model.mass;
        for w in suzuki_weights() {
            let h = w * dt;
            let g = self.model.grad(z.qx, z.qy);
            z.px -= 0.5 * h * g[0];
            z.py -= 0.5 * h * g[1];
            z.qx += h * z.px * inv_m;
            z.qy += h * z.py * inv_m;
            let g = self.model.grad(z.qx, z.qy);
            z.px -= 0.5 * h * g[0];
            z.py -= 0.5 * h * g[1];
        }
    }

    /// The same step together with its exact linearization applied to each
    /// tangent vector, so the tangent map is symplectic to roundoff.
    pub(crate) fn step_with_tangents(&self, z: &mut PhasePoint, vs: &mut [PhasePoint], dt: f64) {
        let inv_m = 1.0 / self.model.mass;
        let kick = |z: &mut PhasePoint, vs: &mut [PhasePoint], h: f64| {
            let g = self.model.grad(z.qx, z.qy);
            let hs = self.model.hess(z.qx, z.qy);
            z.px -= h * g[0];
            z.py -= h * g[1];
            for v in vs.iter_mut() {
                v.px -= h * (hs[0][0] * v.qx + hs[0][1] * v.qy);
                v.py -= h * (hs[1][0] * v.qx + hs[1][1] * v.qy);
            }
        };
        for w in suzuki_weights() {
            let h = w * dt;
            kick(z, vs, 0.5 * h);
            z.qx += h * z.px * inv_m;
            z.qy += h * z.py * inv_m;
            for v in vs.iter_mut() {
                v.qx += h * v.px * inv_m;
                v.qy += h * v.py * inv_m;
            }
            kick(z, vs, 0.5 * h);
        }
    }

    fn guard(&self, z: &PhasePoint, t: f64, last: &PhasePoint, t_last: f64) -> Result<(), DynamicsError> {
        if !z.is_finite() || z.position_norm() > self.escape_radius {
            return Err(DynamicsError::Escape { t: t_last, last: *last, escaped_at: t });
        }
        Ok(())
    }

    pub fn propagate(&self, z0: PhasePoint, n_steps: usize) -> Result<Trajectory, DynamicsError> {
        self.propagate_signed(z0, n_steps, self.dt)
    }

    /// Runs with step `-dt`; the inverse of [`Propagator::propagate`].
    pub fn propagate_backward(&self, z0: PhasePoint, n_steps: usize) -> Result<Trajectory, DynamicsError> {
        self.propagate_signed(z0, n_steps, -self.dt)
    }

    fn propagate_signed(&self, z0: PhasePoint, n_steps: usize, dt: f64) -> Result<Trajectory, DynamicsError> {
        self.check_args(n_steps)?;
        if !z0.is_finite() {
            return Err(DynamicsError::Model(crate::models::ModelError::NonFinite(z0.to_array())));
        }
        let cap = n_steps / self.sample_every + 1;
        let mut traj = Trajectory {
            t: Vec::with_capacity(cap),
            z: Vec::with_capacity(cap),
            energy: Vec::with_capacity(cap),
        };
        let e0 = self.model.energy_unchecked(&z0);
        let escale = if e0 != 0.0 { e0.abs() } else { 1.0 };
        traj.t.push(0.0);
        traj.z.push(z0);
        traj.energy.push(e0);
        let mut z = z0;
        let mut last = z0;
        for step in 1..=n_steps {
            self.step(&mut z, dt);
            let t = step as f64 * dt;
            self.guard(&z, t, &last, (step - 1) as f64 * dt)?;
            last = z;
            if step % self.sample_every == 0 || step == n_steps {
                let e = self.model.energy_unchecked(&z);
                if let Some(bound) = self.energy_drift_bound {
                    let drift = (e - e0).abs() / escale;
                    if drift > bound {
                        return Err(DynamicsError::EnergyDrift { t, drift, bound });
                    }
                }
                traj.t.push(t);
                traj.z.push(z);
                traj.energy.push(e);
            }
        }
        Ok(traj)
    }

    pub fn propagate_tangent(
        &self,
        z0: PhasePoint,
        v0: PhasePoint,
        n_steps: usize,
    ) -> Result<TangentSeries, DynamicsError> {
        self.check_args(n_steps)?;
        if !(v0.norm() > 0.0) {
            return Err(DynamicsError::InvalidArgument("tangent vector must be non-zero".into()));
        }
        let mut out = TangentSeries { t: vec![0.0], z: vec![z0], v: vec![v0] };
        let mut z = z0;
        let mut v = [v0];
        let mut last = z0;
        for step in 1..=n_steps {
            self.step_with_tangents(&mut z, &mut v, self.dt);
            let t = step as f64 * self.dt;
            self.guard(&z, t, &last, (step - 1) as f64 * self.dt)?;
            last = z;
            if step % self.sample_every == 0 || step == n_steps {
                out.t.push(t);
                out.z.push(z);
                out.v.push(v[0]);
            }
        }
        Ok(out)
    }

    /// Jacobian of the `n_steps` flow map at `z0`; column `j` is the image of
    /// the `j`-th unit vector in `(qx, qy, px, py)` order.
    pub fn monodromy(&self, z0: PhasePoint, n_steps: usize) -> Result<Matrix4<f64>, DynamicsError> {
        self.check_args(n_steps)?;
        let mut vs = [
            PhasePoint::new(1.0, 0.0, 0.0, 0.0),
            PhasePoint::new(0.0, 1.0, 0.0, 0.0),
            PhasePoint::new(0.0, 0.0, 1.0, 0.0),
            PhasePoint::new(0.0, 0.0, 0.0, 1.0),
        ];
        let mut z = z0;
        let mut last = z0;
        for step in 1..=n_steps {
            self.step_with_tangents(&mut z, &mut vs, self.dt);
            self.guard(&z, step as f64 * self.dt, &last, (step - 1) as f64 * self.dt)?;
            last = z;
        }
        let mut m = Matrix4::zeros();
        for (j, v) in vs.iter().enumerate() {
            for (i, c) in v.to_array().iter().enumerate() {
                m[(i, j)] = *c;
            }
        }
        Ok(m)
    }
}

pub fn propagate(
    model: &HamiltonianModel,
    z0: PhasePoint,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory, DynamicsError> {
    Propagator::new(*model, dt).propagate(z0, n_steps)
}

pub fn propagate_tangent(
    model: &HamiltonianModel,
    z0: PhasePoint,
    v0: PhasePoint,
    dt: f64,
    n_steps: usize,
) -> Result<TangentSeries, DynamicsError> {
    Propagator::new(*model, dt).propagate_tangent(z0, v0, n_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_closed_form_after_one_period() {
        let m = HamiltonianModel::harmonic(1.0, 1.0);
        let n = 628_319;
        let dt = 2.0 * PI / n as f64;
        let traj = Propagator::new(m, dt).with_sample_every(1000).propagate(PhasePoint::new(1.0, 0.0, 0.0, 0.0), n).unwrap();
        let end = traj.last().unwrap();
        assert!((end.qx - 1.0).abs() < 1e-6);
        // coarser step, same period
        let n = 629;
        let dt = 2.0 * PI / n as f64;
        let traj = propagate(&m, PhasePoint::new(1.0, 0.0, 0.0, 0.0), dt, n).unwrap();
        assert!((traj.last().unwrap().qx - 1.0).abs() < 1e-6);
        for (t, z) in traj.t.iter().zip(&traj.z) {
            assert!((z.qx - t.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn free_drift_is_exact() {
        let m = HamiltonianModel::separable_quartic(0.0, 0.0);
        let traj = propagate(&m, PhasePoint::new(0.0, 0.0, 1.0, 0.0), 0.01, 1000).unwrap();
        for (t, z) in traj.t.iter().zip(&traj.z) {
            assert!((z.qx - t).abs() <= 1e-12 * t.max(1.0));
            assert_eq!(z.qy, 0.0);
        }
    }

    #[test]
    fn forward_then_backward_returns_home() {
        let z0 = PhasePoint::new(0.0, 0.1, 0.35, 0.0);
        for m in [HamiltonianModel::henon_heiles(1.0), HamiltonianModel::separable_quartic(1.0, 1.0)] {
            let p = Propagator::new(m, 0.01);
            let fwd = p.propagate(z0, 5000).unwrap();
            let back = p.propagate_backward(*fwd.last().unwrap(), 5000).unwrap();
            assert!((*back.last().unwrap() - z0).norm() < 1e-9);
            // velocity-flip reversal
            let flipped = p.propagate(fwd.last().unwrap().flip_momentum(), 5000).unwrap();
            assert!((flipped.last().unwrap().flip_momentum() - z0).norm() < 1e-9);
        }
    }

    #[test]
    fn escape_carries_last_valid_sample() {
        let m = HamiltonianModel::henon_heiles(1.0);
        // well above the escape energy, heading out through the saddle at (0, 1)
        let err = Propagator::new(m, 0.01)
            .with_escape_radius(5.0)
            .propagate(PhasePoint::new(0.0, 0.5, 0.0, 2.0), 100_000)
            .unwrap_err();
        match err {
            DynamicsError::Escape { last, t, .. } => {
                assert!(last.position_norm() <= 5.0);
                assert!(t > 0.0);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn drift_bound_aborts() {
        let m = HamiltonianModel::henon_heiles(1.0);
        let err = Propagator::new(m, 0.5)
            .with_energy_drift_bound(1e-14)
            .propagate(PhasePoint::new(0.0, 0.1, 0.4, 0.0), 1000)
            .unwrap_err();
        assert!(matches!(err, DynamicsError::EnergyDrift { .. }));
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = HamiltonianModel::harmonic(1.0, 1.0);
        assert!(propagate(&m, PhasePoint::ZERO, 0.0, 10).is_err());
        assert!(propagate(&m, PhasePoint::ZERO, 0.1, 0).is_err());
        assert!(propagate_tangent(&m, PhasePoint::ZERO, PhasePoint::ZERO, 0.1, 10).is_err());
    }

    #[test]
    fn harmonic_tangent_is_bounded() {
        let m = HamiltonianModel::harmonic(1.0, 1.7);
        let s = propagate_tangent(&m, PhasePoint::new(0.3, 0.2, 0.0, 0.1), PhasePoint::new(1.0, 0.0, 0.0, 1.0), 0.01, 100_000).unwrap();
        let max = s.norms().into_iter().fold(0.0, f64::max);
        // bounded by the condition number of the frequency scaling
        assert!(max < 1.7 * 2f64.sqrt() + 1e-6, "{max}");
    }

    #[test]
    fn inverted_saddle_tangent_growth_rate() {
        let k: f64 = 1.0;
        let m = HamiltonianModel::inverted_harmonic(k);
        let s = Propagator::new(m, 0.01)
            .with_sample_every(100)
            .propagate_tangent(PhasePoint::ZERO, PhasePoint::new(1.0, 0.0, 0.0, 0.0), 2000)
            .unwrap();
        let norms = s.norms();
        let n = norms.len();
        let rate = (norms[n - 1].ln() - norms[n - 6].ln()) / (s.t[n - 1] - s.t[n - 6]);
        assert!((rate - k.sqrt()).abs() / k.sqrt() < 0.02, "{rate}");
    }

    #[test]
    fn monodromy_is_symplectic() {
        let z0 = PhasePoint::new(0.0, 0.1, 0.45, 0.1);
        for m in [
            HamiltonianModel::henon_heiles(1.0),
            HamiltonianModel::pullen_edmonds(0.05),
            HamiltonianModel::harmonic(1.0, 1.0),
        ] {
            let mono = Propagator::new(m, 0.01).monodromy(z0, 628).unwrap();
            assert!((mono.determinant() - 1.0).abs() < 1e-8, "{}", mono.determinant());
        }
    }

    #[test]
    fn period_estimate_for_harmonic() {
        let m = HamiltonianModel::harmonic(2.0, 2.0);
        let traj = propagate(&m, PhasePoint::new(1.0, 0.5, 0.0, 0.0), 0.001, 20_000).unwrap();
        assert!((traj.estimate_period().unwrap() - PI).abs() < 1e-3);
    }
}
