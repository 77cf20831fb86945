use serde::{Deserialize, Serialize};

use super::{DecoherenceError, DecoherenceSeries, Engine};
use crate::classical::{classify_scaling, DivergenceSeries, ScalingFit};

/// One side of a regime comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRun {
    pub label: String,
    pub engine: Engine,
    pub gamma: DecoherenceSeries,
    /// Classical divergence integral behind `gamma`, when available.
    pub divergence: Option<DivergenceSeries>,
    /// Interval on which the run is trusted, `[0, t_ħ]` or the whole run.
    pub ehrenfest_window: (f64, f64),
    /// Window handed to the growth-law fit; defaults to the comparison window.
    pub fit_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub regular_label: String,
    pub chaotic_label: String,
    pub engine: (Engine, Engine),
    /// Intersection of both Ehrenfest windows.
    pub window: (f64, f64),
    pub t: Vec<f64>,
    pub gamma_regular: Vec<f64>,
    pub gamma_chaotic: Vec<f64>,
    /// `γ_chaotic / γ_regular`; 1 where both vanish.
    pub ratio: Vec<f64>,
    pub regular_fit: Option<ScalingFit>,
    pub chaotic_fit: Option<ScalingFit>,
    pub fit_notes: Vec<String>,
    /// Last upward crossing of `γ_chaotic − γ_regular`, linearly interpolated.
    pub crossover: Option<f64>,
    /// `γ_chaotic > γ_regular` on every grid point after the crossover.
    pub dominance: bool,
}

fn interpolate(t: &[f64], y: &[f64], at: f64) -> f64 {
    let n = t.len();
    let k = t.partition_point(|x| *x <= at).clamp(1, n - 1);
    let (ta, tb) = (t[k - 1], t[k]);
    let w = ((at - ta) / (tb - ta)).clamp(0.0, 1.0);
    y[k - 1] + w * (y[k] - y[k - 1])
}

fn fit_run(run: &RegimeRun, window: (f64, f64)) -> Result<ScalingFit, DecoherenceError> {
    let w = run.fit_window.unwrap_or(window);
    let fit = match &run.divergence {
        Some(div) => div.classify(w)?,
        None => classify_scaling(&run.gamma.t, &run.gamma.gamma, w)?,
    };
    Ok(fit)
}

/// Compares two gamma series on `t_grid` restricted to the common Ehrenfest window.
pub fn compare_regimes(
    regular: &RegimeRun,
    chaotic: &RegimeRun,
    t_grid: &[f64],
) -> Result<ComparisonReport, DecoherenceError> {
    for run in [regular, chaotic] {
        let g = &run.gamma;
        if g.t.len() < 2 || g.t.len() != g.gamma.len() {
            return Err(DecoherenceError::InvalidArgument(format!("gamma series of '{}' is malformed", run.label)));
        }
    }
    let lo = regular.ehrenfest_window.0.max(chaotic.ehrenfest_window.0);
    let hi = regular.ehrenfest_window.1.min(chaotic.ehrenfest_window.1);
    if !(hi > lo) {
        return Err(DecoherenceError::WindowMismatch(format!(
            "Ehrenfest windows {:?} and {:?} do not overlap",
            regular.ehrenfest_window, chaotic.ehrenfest_window
        )));
    }
    let covered = |run: &RegimeRun| run.gamma.t[0] <= lo && *run.gamma.t.last().unwrap() >= hi;
    for run in [regular, chaotic] {
        if !covered(run) {
            return Err(DecoherenceError::WindowMismatch(format!(
                "gamma series of '{}' does not cover the window [{lo}, {hi}]",
                run.label
            )));
        }
    }
    let t: Vec<f64> = t_grid.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
    if t.len() < 2 {
        return Err(DecoherenceError::WindowMismatch(format!(
            "fewer than two grid points inside the window [{lo}, {hi}]"
        )));
    }
    let gamma_regular: Vec<f64> = t.iter().map(|x| interpolate(&regular.gamma.t, &regular.gamma.gamma, *x)).collect();
    let gamma_chaotic: Vec<f64> = t.iter().map(|x| interpolate(&chaotic.gamma.t, &chaotic.gamma.gamma, *x)).collect();
    let ratio = gamma_regular
        .iter()
        .zip(&gamma_chaotic)
        .map(|(r, c)| if *r == 0.0 && *c == 0.0 { 1.0 } else { c / r })
        .collect();

    let diff: Vec<f64> = gamma_chaotic.iter().zip(&gamma_regular).map(|(c, r)| c - r).collect();
    let mut crossover = None;
    for k in 1..diff.len() {
        if diff[k - 1] <= 0.0 && diff[k] > 0.0 {
            let w = -diff[k - 1] / (diff[k] - diff[k - 1]);
            crossover = Some((k, t[k - 1] + w * (t[k] - t[k - 1])));
        }
    }
    let dominance = match crossover {
        Some((k, _)) => diff[k..].iter().all(|d| *d > 0.0),
        None => false,
    };

    let mut fit_notes = Vec::new();
    let mut fit = |run: &RegimeRun| match fit_run(run, (lo, hi)) {
        Ok(f) => Some(f),
        Err(e) => {
            fit_notes.push(format!("{}: {e}", run.label));
            None
        }
    };
    let regular_fit = fit(regular);
    let chaotic_fit = fit(chaotic);

    Ok(ComparisonReport {
        regular_label: regular.label.clone(),
        chaotic_label: chaotic.label.clone(),
        engine: (regular.engine, chaotic.engine),
        window: (lo, hi),
        t,
        gamma_regular,
        gamma_chaotic,
        ratio,
        regular_fit,
        chaotic_fit,
        fit_notes,
        crossover: crossover.map(|(_, x)| x),
        dominance,
    })
}
