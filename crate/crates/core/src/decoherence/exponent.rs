use serde::{Deserialize, Serialize};

use super::DecoherenceError;
use crate::bath::{check_uniform, DriveDifference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentSource {
    Asymptotic,
    Oracle,
}

/// Which dynamics produced the drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Classical,
    Quantum,
}

impl Engine {
    pub fn tag(&self) -> &'static str {
        match self {
            Engine::Classical => "classical",
            Engine::Quantum => "quantum",
        }
    }
}

/// `−ln |⟨z₁(t)|χ(t)|z₂(t)⟩|` against time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceSeries {
    pub t: Vec<f64>,
    pub gamma: Vec<f64>,
    pub source: ExponentSource,
}

impl DecoherenceSeries {
    pub fn from_oracle(t: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self { t, gamma, source: ExponentSource::Oracle }
    }

    /// Coherence modulus `e^{−γ}` per sample.
    pub fn coherence(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| (-g).exp()).collect()
    }
}

/// High-temperature, wide-band exponent
/// `γ(t) = (C T / 2) ∫₀ᵗ [Δq_x² + Δq_y²] dτ` (`ħ = k_B = 1`), trapezoid on the drive grid.
pub fn asymptotic_exponent(dd: &DriveDifference, c: f64, temperature: f64) -> Result<DecoherenceSeries, DecoherenceError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(DecoherenceError::InvalidArgument(format!("C must be > 0 (got {c})")));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(DecoherenceError::InvalidArgument(format!("T must be > 0 (got {temperature})")));
    }
    check_uniform(&dd.t)?;
    let prefactor = 0.5 * c * temperature;
    let integrand: Vec<f64> = dd.df_x.iter().zip(&dd.df_y).map(|(x, y)| x * x + y * y).collect();
    let mut gamma = Vec::with_capacity(dd.t.len());
    let mut acc = 0.0;
    for k in 0..dd.t.len() {
        if k > 0 {
            acc += 0.5 * (dd.t[k] - dd.t[k - 1]) * (integrand[k - 1] + integrand[k]);
        }
        gamma.push(prefactor * acc);
    }
    Ok(DecoherenceSeries { t: dd.t.clone(), gamma, source: ExponentSource::Asymptotic })
}
