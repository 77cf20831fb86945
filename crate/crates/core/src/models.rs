//! Two-dimensional Hamiltonian families `H = |p|²/2m + V(q)`.
//!
//! Every potential is a polynomial, so gradients and Hessians are coded
//! analytically. Finite differences appear only in tests.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite coordinate in model evaluation: {0:?}")]
    NonFinite([f64; 4]),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

/// A point `(qx, qy, px, py)` of the four-dimensional phase space.
///
/// Displacements between phase points use the same type.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub qx: f64,
    pub qy: f64,
    pub px: f64,
    pub py: f64,
}

impl PhasePoint {
    pub const ZERO: PhasePoint = PhasePoint { qx: 0.0, qy: 0.0, px: 0.0, py: 0.0 };

    pub const fn new(qx: f64, qy: f64, px: f64, py: f64) -> Self {
        Self { qx, qy, px, py }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.qx, self.qy, self.px, self.py]
    }

    pub fn q(&self) -> [f64; 2] {
        [self.qx, self.qy]
    }

    pub fn p(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn position_norm(&self) -> f64 {
        self.qx.hypot(self.qy)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Momentum reversal, used for time-reversal checks.
    pub fn flip_momentum(self) -> Self {
        Self::new(self.qx, self.qy, -self.px, -self.py)
    }
}

impl Add for PhasePoint {
    type Output = PhasePoint;
    fn add(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.qx + o.qx, self.qy + o.qy, self.px + o.px, self.py + o.py)
    }
}

impl Sub for PhasePoint {
    type Output = PhasePoint;
    fn sub(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.qx - o.qx, self.qy - o.qy, self.px - o.px, self.py - o.py)
    }
}

impl Mul<f64> for PhasePoint {
    type Output = PhasePoint;
    fn mul(self, s: f64) -> PhasePoint {
        PhasePoint::new(self.qx * s, self.qy * s, self.px * s, self.py * s)
    }
}

/// Potential families. Parameter names follow the config file keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Family {
    /// `V = m (ωx² qx² + ωy² qy²) / 2`
    Harmonic2D { omega_x: f64, omega_y: f64 },
    /// `V = -k qx² / 2`, free along `qy`. Linear saddle with exponent `sqrt(k/m)`.
    InvertedHarmonic1DEmbedded { k: f64 },
    /// `V = (a qx⁴ + b qy⁴) / 4`. Integrable; `a = b = 0` is free motion.
    SeparableQuartic { a: f64, b: f64 },
    /// `V = (qx² + qy²)/2 + λ (qx² qy − qy³/3)`. Bounded below `E = 1/(6λ²)`.
    HenonHeiles { lambda: f64 },
    /// `V = (qx² + qy²)/2 + α qx² qy²`.
    PullenEdmonds { alpha: f64 },
}

impl Family {
    pub const NAMES: [&'static str; 5] = [
        "Harmonic2D",
        "InvertedHarmonic1DEmbedded",
        "SeparableQuartic",
        "HenonHeiles",
        "PullenEdmonds",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Harmonic2D { .. } => Self::NAMES[0],
            Family::InvertedHarmonic1DEmbedded { .. } => Self::NAMES[1],
            Family::SeparableQuartic { .. } => Self::NAMES[2],
            Family::HenonHeiles { .. } => Self::NAMES[3],
            Family::PullenEdmonds { .. } => Self::NAMES[4],
        }
    }
}

fn unit_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianModel {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "unit_mass")]
    pub mass: f64,
}

impl fmt::Display for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} (m = {})", self.family, self.mass)
    }
}

fn check_q(q: [f64; 2]) -> Result<(), ModelError> {
    if q[0].is_finite() && q[1].is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite([q[0], q[1], 0.0, 0.0]))
    }
}

impl HamiltonianModel {
    pub fn new(family: Family) -> Self {
        Self { family, mass: 1.0 }
    }

    pub fn with_mass(family: Family, mass: f64) -> Self {
        Self { family, mass }
    }

    pub fn harmonic(omega_x: f64, omega_y: f64) -> Self {
        Self::new(Family::Harmonic2D { omega_x, omega_y })
    }

    pub fn inverted_harmonic(k: f64) -> Self {
        Self::new(Family::InvertedHarmonic1DEmbedded { k })
    }

    pub fn separable_quartic(a: f64, b: f64) -> Self {
        Self::new(Family::SeparableQuartic { a, b })
    }

    pub fn henon_heiles(lambda: f64) -> Self {
        Self::new(Family::HenonHeiles { lambda })
    }

    pub fn pullen_edmonds(alpha: f64) -> Self {
        Self::new(Family::PullenEdmonds { alpha })
    }

    /// Checks the per-family parameter constraints, returning every violation.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("model.{name} must be finite and > 0 (got {v})"));
            }
        };
        positive("mass", self.mass);
        match self.family {
            Family::Harmonic2D { omega_x, omega_y } => {
                positive("omega_x", omega_x);
                positive("omega_y", omega_y);
            }
            Family::InvertedHarmonic1DEmbedded { k } => positive("k", k),
            Family::HenonHeiles { lambda } => positive("lambda", lambda),
            Family::PullenEdmonds { alpha } => positive("alpha", alpha),
            Family::SeparableQuartic { a, b } => {
                for (name, v) in [("a", a), ("b", b)] {
                    if !(v.is_finite() && v >= 0.0) {
                        errs.push(format!("model.{name} must be finite and >= 0 (got {v})"));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub(crate) fn v(&self, x: f64, y: f64) -> f64 {
        match self.family {
            Family::Harmonic2D { omega_x, omega_y } => {
                0.5 * self.mass * (omega_x * omega_x * x * x + omega_y * omega_y * y * y)
            }
            Family::InvertedHarmonic1DEmbedded { k } => -0.5 * k * x * x,
            Family::SeparableQuartic { a, b } => 0.25 * (a * x.powi(4) + b * y.powi(4)),
            Family::HenonHeiles { lambda } => {
                0.5 * (x * x + y * y) + lambda * (x * x * y - y * y * y / 3.0)
            }
            Family::PullenEdmonds { alpha } => 0.5 * (x * x + y * y) + alpha * x * x * y * y,
        }
    }

    pub(crate) fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        match self.family {
            Family::Harmonic2D { omega_x, omega_y } => {
                [self.mass * omega_x * omega_x * x, self.mass * omega_y * omega_y * y]
            }
            Family::InvertedHarmonic1DEmbedded { k } => [-k * x, 0.0],
            Family::SeparableQuartic { a, b } => [a * x * x * x, b * y * y * y],
            Family::HenonHeiles { lambda } => {
                [x + 2.0 * lambda * x * y, y + lambda * (x * x - y * y)]
            }
            Family::PullenEdmonds { alpha } => {
                [x + 2.0 * alpha * x * y * y, y + 2.0 * alpha * x * x * y]
            }
        }
    }

    pub(crate) fn hess(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (hxx, hxy, hyy) = match self.family {
            Family::Harmonic2D { omega_x, omega_y } => {
                (self.mass * omega_x * omega_x, 0.0, self.mass * omega_y * omega_y)
            }
            Family::InvertedHarmonic1DEmbedded { k } => (-k, 0.0, 0.0),
            Family::SeparableQuartic { a, b } => (3.0 * a * x * x, 0.0, 3.0 * b * y * y),
            Family::HenonHeiles { lambda } => {
                (1.0 + 2.0 * lambda * y, 2.0 * lambda * x, 1.0 - 2.0 * lambda * y)
            }
            Family::PullenEdmonds { alpha } => (
                1.0 + 2.0 * alpha * y * y,
                4.0 * alpha * x * y,
                1.0 + 2.0 * alpha * x * x,
            ),
        };
        [[hxx, hxy], [hxy, hyy]]
    }

    pub fn potential(&self, q: [f64; 2]) -> Result<f64, ModelError> {
        check_q(q)?;
        Ok(self.v(q[0], q[1]))
    }

    pub fn grad_potential(&self, q: [f64; 2]) -> Result<[f64; 2], ModelError> {
        check_q(q)?;
        Ok(self.grad(q[0], q[1]))
    }

    pub fn hessian_potential(&self, q: [f64; 2]) -> Result<[[f64; 2]; 2], ModelError> {
        check_q(q)?;
        Ok(self.hess(q[0], q[1]))
    }

    pub(crate) fn energy_unchecked(&self, z: &PhasePoint) -> f64 {
        (z.px * z.px + z.py * z.py) / (2.0 * self.mass) + self.v(z.qx, z.qy)
    }

    pub fn total_energy(&self, z: &PhasePoint) -> Result<f64, ModelError> {
        if !z.is_finite() {
            return Err(ModelError::NonFinite(z.to_array()));
        }
        Ok(self.energy_unchecked(z))
    }

    /// Whether constant-energy shells around the origin are compact.
    pub fn is_bounded(&self) -> bool {
        match self.family {
            Family::Harmonic2D { .. } | Family::PullenEdmonds { .. } => true,
            Family::SeparableQuartic { a, b } => a > 0.0 && b > 0.0,
            Family::HenonHeiles { .. } => true,
            Family::InvertedHarmonic1DEmbedded { .. } => false,
        }
    }

    /// Energy above which the shell around the origin opens up.
    pub fn escape_energy(&self) -> f64 {
        match self.family {
            Family::HenonHeiles { lambda } => 1.0 / (6.0 * lambda * lambda),
            _ if self.is_bounded() => f64::INFINITY,
            _ => 0.0,
        }
    }

    /// Diameter of the allowed region `{V(q) ≤ E}` containing the origin.
    ///
    /// Found by bisection along 720 rays from the origin, taking the largest
    /// `r(θ) + r(θ + π)`. Returns `None` for open shells.
    pub fn shell_diameter(&self, energy: f64) -> Option<f64> {
        if !self.is_bounded() || !(energy > 0.0) || energy >= self.escape_energy() {
            return None;
        }
        const RAYS: usize = 720;
        let radii: Vec<f64> = (0..RAYS)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / RAYS as f64;
                self.turning_radius(energy, theta.cos(), theta.sin())
            })
            .collect::<Option<_>>()?;
        let half = RAYS / 2;
        (0..half).map(|i| radii[i] + radii[i + half]).reduce(f64::max)
    }

    fn turning_radius(&self, energy: f64, cx: f64, cy: f64) -> Option<f64> {
        let mut lo = 0.0;
        let mut hi = 1e-3;
        while self.v(hi * cx, hi * cy) < energy {
            lo = hi;
            hi *= 1.5;
            if hi > 1e6 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.v(mid * cx, mid * cy) < energy {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }
}
