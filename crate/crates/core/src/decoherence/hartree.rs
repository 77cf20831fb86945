//! First-order error of the product (Hartree) ansatz, as a weighted time
//! average of the position variances.

use serde::{Deserialize, Serialize};

use super::special::cin;
use super::DecoherenceError;
use crate::quantum::ExpectationSeries;

/// Below this `Ω_max = ω_max t` the asymptotic error formula is flagged.
pub const OMEGA_FLOOR: f64 = 10.0;
/// Arguments below which `(1 − cos x)/x` is evaluated by its series.
const SERIES_SWITCH: f64 = 1e-4;

/// `(1 − cos x)/x`, exact at `x = 0`.
fn one_minus_cos_over(x: f64) -> f64 {
    if x.abs() < SERIES_SWITCH {
        let x2 = x * x;
        x * (0.5 - x2 / 24.0 + x2 * x2 / 720.0)
    } else {
        2.0 * (0.5 * x).sin().powi(2) / x
    }
}

/// `w(u) = (1 − cos[Ω(1−u)])/(1−u) + (1 − cos Ωu)/u` for `u = τ/t ∈ [0, 1]`.
pub fn weight_w(u: f64, omega_max_t: f64) -> Result<f64, DecoherenceError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(DecoherenceError::InvalidArgument(format!("u = {u} outside [0, 1]")));
    }
    Ok(weight_unchecked(u, omega_max_t))
}

fn weight_unchecked(u: f64, big_omega: f64) -> f64 {
    big_omega * (one_minus_cos_over(big_omega * (1.0 - u)) + one_minus_cos_over(big_omega * u))
}

/// `∫₀¹ w(u) du = 2 [ln Ω + γ_E − Ci(Ω)]`.
pub fn weight_integral_closed_form(big_omega: f64) -> f64 {
    2.0 * cin(big_omega)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HartreeErrorEstimate {
    pub t: f64,
    /// Estimate of `⟨Δψ|Δψ⟩`.
    pub value: f64,
    pub omega_max: f64,
    /// `Ω_max = ω_max t`.
    pub big_omega: f64,
    pub warning: Option<String>,
}

/// `(C/2π) t⁻¹ ∫₀ᵗ [Δq_x² + Δq_y²](τ) w_t(τ) dτ`.
///
/// The variances are interpolated linearly between samples and the product
/// with the weight is integrated by composite Simpson on a grid fine enough to
/// resolve the cutoff oscillation (`Ω h ≤ 0.02` in `u`).
pub fn hartree_error(
    varseries: &ExpectationSeries,
    c: f64,
    omega_max: f64,
    t_eval: f64,
) -> Result<HartreeErrorEstimate, DecoherenceError> {
    if !(c > 0.0 && omega_max > 0.0 && t_eval > 0.0) {
        return Err(DecoherenceError::InvalidArgument(format!(
            "need C, omega_max, t > 0 (got {c}, {omega_max}, {t_eval})"
        )));
    }
    let ts = &varseries.t;
    let n = ts.len();
    let span = t_eval.max(1.0);
    if n < 2 || ts[0] > 1e-12 * span || ts[n - 1] < t_eval * (1.0 - 1e-12) {
        return Err(DecoherenceError::SeriesTooShort { needed: t_eval, have: ts.last().copied().unwrap_or(0.0) });
    }
    let total_var: Vec<f64> = varseries.var_q.iter().map(|v| v[0] + v[1]).collect();
    let var_at = |tau: f64| -> f64 {
        let k = ts.partition_point(|x| *x <= tau).clamp(1, n - 1);
        let (ta, tb) = (ts[k - 1], ts[k]);
        let w = ((tau - ta) / (tb - ta)).clamp(0.0, 1.0);
        total_var[k - 1] + w * (total_var[k] - total_var[k - 1])
    };
    let big_omega = omega_max * t_eval;
    let samples_inside = ts.partition_point(|x| *x <= t_eval);
    let mut m = ((big_omega / 0.02).ceil() as usize).max(4 * samples_inside).max(64);
    if m % 2 == 1 {
        m += 1;
    }
    let h = 1.0 / m as f64;
    let f = |u: f64| var_at(u * t_eval) * weight_unchecked(u, big_omega);
    let mut acc = f(0.0) + f(1.0);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    let average = acc * h / 3.0;
    let warning = (big_omega < OMEGA_FLOOR).then(|| {
        format!("Omega_max = {big_omega} below the asymptotic validity floor {OMEGA_FLOOR}")
    });
    Ok(HartreeErrorEstimate {
        t: t_eval,
        value: c / (2.0 * std::f64::consts::PI) * average,
        omega_max,
        big_omega,
        warning,
    })
}
