//! Power-law versus exponential growth classification of a positive series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DivergenceSeries;

/// Minimum number of usable samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 20;
/// r² gap below which both fits are reported and the result flagged.
pub const AMBIGUITY_GAP: f64 = 0.01;
/// Regular fits start after this many natural periods.
pub const TRANSIENT_PERIODS: f64 = 5.0;
/// Chaotic fits end once the separation exceeds this fraction of the shell diameter.
pub const SATURATION_FRACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit window [{lo}, {hi}] holds {found} usable samples, need at least {MIN_FIT_SAMPLES}")]
    TooFewSamples { lo: f64, hi: f64, found: usize },
    #[error("degenerate fit window: all values equal")]
    Degenerate,
    #[error("invalid fit window [{0}, {1}]")]
    BadWindow(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingKind {
    PowerLaw,
    Exponential,
}

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Some(LineFit { slope, intercept, r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub kind: ScalingKind,
    /// Power-law exponent or exponential rate of the selected model.
    pub exponent_or_rate: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// `ln y` against `ln t`.
    pub power_law: LineFit,
    /// `ln y` against `t`.
    pub exponential: LineFit,
    /// Set when the two r² values differ by less than [`AMBIGUITY_GAP`].
    pub ambiguous: bool,
}

/// Fits `ln y ~ ln t` and `ln y ~ t` over `window` and keeps the better one.
pub fn classify_scaling(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<ScalingFit, FitError> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(FitError::BadWindow(lo, hi));
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (a, b) in t.iter().zip(y) {
        if *a >= lo && *a <= hi && *a > 0.0 && *b > 0.0 && b.is_finite() {
            ts.push(*a);
            ys.push(*b);
        }
    }
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples { lo, hi, found: ts.len() });
    }
    if ys.iter().all(|v| *v == ys[0]) {
        return Err(FitError::Degenerate);
    }
    let ln_y: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let ln_t: Vec<f64> = ts.iter().map(|v| v.ln()).collect();
    let power_law = fit_line(&ln_t, &ln_y).ok_or(FitError::Degenerate)?;
    let exponential = fit_line(&ts, &ln_y).ok_or(FitError::Degenerate)?;
    let (kind, best) = if exponential.r_squared > power_law.r_squared {
        (ScalingKind::Exponential, exponential)
    } else {
        (ScalingKind::PowerLaw, power_law)
    };
    Ok(ScalingFit {
        kind,
        exponent_or_rate: best.slope,
        r_squared: best.r_squared,
        window: (ts[0], ts[ts.len() - 1]),
        power_law,
        exponential,
        ambiguous: (exponential.r_squared - power_law.r_squared).abs() < AMBIGUITY_GAP,
    })
}

impl DivergenceSeries {
    pub fn classify(&self, window: (f64, f64)) -> Result<ScalingFit, FitError> {
        classify_scaling(&self.t, &self.d, window)
    }

    /// Fit window for regular orbits: from [`TRANSIENT_PERIODS`] natural
    /// periods to the end of the series.
    pub fn regular_window(&self, period: f64) -> (f64, f64) {
        (TRANSIENT_PERIODS * period, self.t.last().copied().unwrap_or(0.0))
    }

    /// Fit window for chaotic orbits: opens once the separation has grown by
    /// `growth_factor` over its initial phase-space size `delta`, closes one
    /// sample before the separation reaches [`SATURATION_FRACTION`] of the
    /// shell diameter.
    pub fn chaotic_window(&self, delta: f64, growth_factor: f64, shell_diameter: f64) -> (f64, f64) {
        let start = self.first_exceeding(growth_factor * delta).unwrap_or(0.0);
        let end = match self.separation.iter().position(|s| *s > SATURATION_FRACTION * shell_diameter) {
            Some(i) if i > 0 => self.t[i - 1],
            Some(_) => 0.0,
            None => self.t.last().copied().unwrap_or(0.0),
        };
        (start, end)
    }
}
