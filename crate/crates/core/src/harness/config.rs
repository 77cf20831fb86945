use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::SpectralDensity;
use crate::decoherence::Engine;
use crate::models::{Family, HamiltonianModel, PhasePoint};
use crate::quantum::Grid2D;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// Which dynamics generate the drive differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineSelection {
    #[default]
    Classical,
    Quantum,
    Both,
}

impl EngineSelection {
    pub fn engines(self) -> Vec<Engine> {
        match self {
            EngineSelection::Classical => vec![Engine::Classical],
            EngineSelection::Quantum => vec![Engine::Quantum],
            EngineSelection::Both => vec![Engine::Classical, Engine::Quantum],
        }
    }

    pub fn includes(self, engine: Engine) -> bool {
        self.engines().contains(&engine)
    }
}

impl std::str::FromStr for EngineSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(Self::Classical),
            "quantum" => Ok(Self::Quantum),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown engine '{other}' (expected classical, quantum or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    /// `[qx, qy, px, py]` of the first packet centre.
    pub z: [f64; 4],
    /// Offset of the second packet centre.
    pub delta_z: [f64; 4],
}

impl InitialConditions {
    pub fn z(&self) -> PhasePoint {
        PhasePoint::from_array(self.z)
    }

    pub fn delta_z(&self) -> PhasePoint {
        PhasePoint::from_array(self.delta_z)
    }
}

fn default_sample_every() -> usize {
    10
}

fn default_escape_radius() -> f64 {
    crate::classical::DEFAULT_ESCAPE_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub n_steps: usize,
    /// Steps between stored samples; also the drive sampling used by the bath.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_escape_radius")]
    pub escape_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_drift_bound: Option<f64>,
}

impl IntegratorSpec {
    pub fn sample_spacing(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "LyapunovSpec::default_total_time")]
    pub total_time: f64,
    #[serde(default = "LyapunovSpec::default_renorm")]
    pub renorm_interval: f64,
    /// Defaults to the integrator step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl LyapunovSpec {
    fn default_total_time() -> f64 {
        2e4
    }

    fn default_renorm() -> f64 {
        1.0
    }
}

impl Default for LyapunovSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            total_time: Self::default_total_time(),
            renorm_interval: Self::default_renorm(),
            dt: None,
        }
    }
}

fn default_modes() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub c: f64,
    pub omega_max: f64,
    pub temperature: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Compute the discretized-bath exponent alongside the asymptotic one.
    #[serde(default = "yes")]
    pub oracle: bool,
}

fn default_break_fraction() -> f64 {
    crate::quantum::BREAK_THRESHOLD_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hbar: f64,
    /// Position standard deviations of both packets.
    pub widths: [f64; 2],
    pub n_steps: usize,
    /// Defaults to the integrator step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Break-time threshold as a fraction of the energy-shell diameter.
    #[serde(default = "default_break_fraction")]
    pub break_fraction: f64,
}

impl QuantumSpec {
    pub fn grid(&self) -> Grid2D {
        Grid2D { nx: self.nx, ny: self.ny, lx: self.lx, ly: self.ly, hbar: self.hbar }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitPolicy {
    /// Window starts after the transient periods and runs to the end.
    #[default]
    Regular,
    /// Window runs from the growth onset to just before saturation.
    Chaotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    #[serde(default)]
    pub policy: FitPolicy,
    /// Explicit `[t_lo, t_hi]`, overriding the policy window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Separation growth (relative to the initial offset) that opens a chaotic window.
    #[serde(default = "FitSpec::default_growth")]
    pub growth_factor: f64,
    /// Members of the geometric-mean divergence ensemble; 1 fits the single pair.
    #[serde(default = "FitSpec::default_members")]
    pub ensemble_members: usize,
    /// Time between ensemble starting points along the reference orbit.
    #[serde(default = "FitSpec::default_spacing")]
    pub ensemble_spacing: f64,
    /// Ensemble offset magnitude; defaults to `|δz|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_delta: Option<f64>,
}

impl FitSpec {
    fn default_growth() -> f64 {
        10.0
    }

    fn default_members() -> usize {
        1
    }

    fn default_spacing() -> f64 {
        37.0
    }
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            policy: FitPolicy::default(),
            window: None,
            growth_factor: Self::default_growth(),
            ensemble_members: Self::default_members(),
            ensemble_spacing: Self::default_spacing(),
            ensemble_delta: None,
        }
    }
}

/// Superposition coefficients `c₁, c₂` as `[re, im]`. Carried as metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Superposition {
    pub c1: [f64; 2],
    pub c2: [f64; 2],
}

impl Default for Superposition {
    fn default() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self { c1: [a, 0.0], c2: [a, 0.0] }
    }
}

fn default_label() -> String {
    "run".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default)]
    pub engine: EngineSelection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: HamiltonianModel,
    pub initial: InitialConditions,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub lyapunov: LyapunovSpec,
    pub bath: BathSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumSpec>,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub superposition: Superposition,
}

impl ExperimentConfig {
    pub fn energy(&self) -> f64 {
        self.model.energy_unchecked(&self.initial.z())
    }

    pub fn slug(&self) -> String {
        let mut s: String = self
            .label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
            .collect();
        while s.contains("--") {
            s = s.replace("--", "-");
        }
        let s = s.trim_matches('-').to_string();
        if s.is_empty() {
            "run".into()
        } else {
            s
        }
    }

    pub fn quantum_dt(&self) -> f64 {
        self.quantum.as_ref().and_then(|q| q.dt).unwrap_or(self.integrator.dt)
    }

    pub fn lyapunov_dt(&self) -> f64 {
        self.lyapunov.dt.unwrap_or(self.integrator.dt)
    }

    /// Every constraint violation, in a stable order.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!("schema_version: expected {SCHEMA_VERSION}, found {}", self.schema_version));
        }
        if self.seed > i64::MAX as u64 {
            errs.push(format!("seed: must be < 2^63 (got {})", self.seed));
        }
        if let Err(v) = self.model.validate() {
            errs.extend(v.into_iter().map(|e| format!("model: {e}")));
        }
        let z = self.initial.z();
        if !z.is_finite() {
            errs.push("initial.z: non-finite component".into());
        }
        if !self.initial.delta_z().is_finite() {
            errs.push("initial.delta_z: non-finite component".into());
        }

        let integ = &self.integrator;
        if !(integ.dt.is_finite() && integ.dt > 0.0) {
            errs.push(format!("integrator.dt: must be > 0 (got {})", integ.dt));
        }
        if integ.n_steps == 0 {
            errs.push("integrator.n_steps: must be >= 1".into());
        }
        if integ.sample_every == 0 {
            errs.push("integrator.sample_every: must be >= 1".into());
        } else if !integ.n_steps.is_multiple_of(integ.sample_every) {
            errs.push("integrator.n_steps: must be a multiple of sample_every (uniform drive grid)".into());
        }
        if !(integ.escape_radius > 0.0) {
            errs.push(format!("integrator.escape_radius: must be > 0 (got {})", integ.escape_radius));
        }
        if let Some(b) = integ.energy_drift_bound {
            if !(b > 0.0) {
                errs.push(format!("integrator.energy_drift_bound: must be > 0 (got {b})"));
            }
        }

        let lyap = &self.lyapunov;
        if !(lyap.renorm_interval > 0.0 && lyap.total_time >= lyap.renorm_interval) {
            errs.push(format!(
                "lyapunov: need 0 < renorm_interval <= total_time (got {}, {})",
                lyap.renorm_interval, lyap.total_time
            ));
        }
        if let Some(dt) = lyap.dt {
            if !(dt > 0.0) {
                errs.push(format!("lyapunov.dt: must be > 0 (got {dt})"));
            }
        }

        let bath = &self.bath;
        match SpectralDensity::new(bath.c, bath.omega_max) {
            Ok(sd) => {
                let limit = sd.max_drive_step();
                if integ.sample_spacing() > limit * (1.0 + 1e-12) {
                    errs.push(format!(
                        "bath sampling bound: integrator dt * sample_every = {} exceeds pi/(10 omega_max) = {limit}",
                        integ.sample_spacing()
                    ));
                }
                if let Some(q) = &self.quantum {
                    let spacing = self.quantum_dt() * q.sample_every as f64;
                    if self.engine.includes(Engine::Quantum) && spacing > limit * (1.0 + 1e-12) {
                        errs.push(format!(
                            "bath sampling bound: quantum dt * sample_every = {spacing} exceeds pi/(10 omega_max) = {limit}"
                        ));
                    }
                }
            }
            Err(e) => errs.push(format!("bath: {e}")),
        }
        if bath.modes < 2 {
            errs.push(format!("bath.modes: must be >= 2 (got {})", bath.modes));
        }
        if !(bath.temperature.is_finite() && bath.temperature > 0.0) {
            errs.push(format!("bath.temperature: must be > 0 (got {})", bath.temperature));
        }

        match &self.quantum {
            Some(q) => {
                let grid = q.grid();
                if let Err(v) = grid.validate() {
                    errs.extend(v.into_iter().map(|e| format!("quantum: {e}")));
                } else {
                    for (name, s, cell, len) in
                        [("widths[0]", q.widths[0], grid.dx(), q.lx), ("widths[1]", q.widths[1], grid.dy(), q.ly)]
                    {
                        if !(s > 2.0 * cell && s < len / 10.0) {
                            errs.push(format!("quantum.{name}: {s} must lie in (2 cells = {}, box/10 = {})", 2.0 * cell, len / 10.0));
                        }
                    }
                }
                if q.n_steps == 0 || q.sample_every == 0 {
                    errs.push("quantum: n_steps and sample_every must be >= 1".into());
                } else if !q.n_steps.is_multiple_of(q.sample_every) {
                    errs.push("quantum.n_steps: must be a multiple of sample_every (uniform drive grid)".into());
                }
                if let Some(dt) = q.dt {
                    if !(dt > 0.0) {
                        errs.push(format!("quantum.dt: must be > 0 (got {dt})"));
                    }
                }
                if !(q.break_fraction > 0.0) {
                    errs.push(format!("quantum.break_fraction: must be > 0 (got {})", q.break_fraction));
                }
            }
            None if self.engine.includes(Engine::Quantum) => {
                errs.push(format!("quantum: section required for engine '{:?}'", self.engine).to_lowercase());
            }
            None => {}
        }

        let fit = &self.fit;
        if let Some([lo, hi]) = fit.window {
            if !(lo >= 0.0 && hi > lo) {
                errs.push(format!("fit.window: need 0 <= t_lo < t_hi (got [{lo}, {hi}])"));
            }
        }
        if !(fit.growth_factor > 1.0) {
            errs.push(format!("fit.growth_factor: must be > 1 (got {})", fit.growth_factor));
        }
        if fit.ensemble_members == 0 {
            errs.push("fit.ensemble_members: must be >= 1".into());
        }
        if !(fit.ensemble_spacing > 0.0) {
            errs.push(format!("fit.ensemble_spacing: must be > 0 (got {})", fit.ensemble_spacing));
        }
        if let Some(d) = fit.ensemble_delta {
            if !(d > 0.0) {
                errs.push(format!("fit.ensemble_delta: must be > 0 (got {d})"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parses and validates a config document.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut errs = Vec::new();
        if let Some(model) = table.get("model").and_then(|m| m.as_table()) {
            match model.get("family").and_then(|f| f.as_str()) {
                Some(name) if !Family::NAMES.contains(&name) => errs.push(format!(
                    "model.family: unknown family '{name}'; valid families are {}",
                    Family::NAMES.join(", ")
                )),
                None => errs.push(format!("model.family: missing; valid families are {}", Family::NAMES.join(", "))),
                _ => {}
            }
        }
        if !errs.is_empty() {
            return Err(ConfigError::Invalid(errs));
        }
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate().map_err(ConfigError::Invalid)?;
        Ok(config)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    ExperimentConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
seed = 7

[model]
family = "Harmonic2D"
omega_x = 1.0
omega_y = 1.0

[initial]
z = [0.5, 0.0, 0.0, 0.5]
delta_z = [1e-3, 0.0, 0.0, 0.0]

[integrator]
dt = 0.01
n_steps = 1000

[bath]
c = 1.0
omega_max = 3.0
temperature = 1000.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.integrator.sample_every, 10);
        assert_eq!(c.bath.modes, 10_000);
        assert!(c.bath.oracle);
        assert_eq!(c.engine, EngineSelection::Classical);
        assert_eq!(c.fit, FitSpec::default());
        assert_eq!(c.lyapunov, LyapunovSpec::default());
        assert_eq!(c.model.mass, 1.0);
        assert_eq!(c.label, "run");
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn bath_sampling_bound_is_named() {
        let text = MINIMAL.replace("omega_max = 3.0", "omega_max = 100.0");
        match ExperimentConfig::from_toml(&text) {
            Err(ConfigError::Invalid(v)) => assert!(v.iter().any(|e| e.starts_with("bath sampling bound")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_family_lists_valid_ones() {
        let text = MINIMAL.replace("Harmonic2D", "Lorenz");
        match ExperimentConfig::from_toml(&text) {
            Err(ConfigError::Invalid(v)) => {
                for name in Family::NAMES {
                    assert!(v[0].contains(name));
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn violations_are_aggregated() {
        let text = MINIMAL
            .replace("dt = 0.01", "dt = -0.01")
            .replace("temperature = 1000.0", "temperature = 0.0")
            .replace("schema_version = 1", "schema_version = 9");
        match ExperimentConfig::from_toml(&text) {
            Err(ConfigError::Invalid(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_seed_and_syntax_errors_are_parse_errors() {
        let text = MINIMAL.replace("seed = 7", "");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ConfigError::Parse(m)) if m.contains("seed")));
        let err = ExperimentConfig::from_toml("schema_version = = 1").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn quantum_engine_needs_quantum_section() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nengine = \"both\"");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn slug_is_filesystem_safe() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.label = "Hénon Heiles / chaotic!".into();
        assert_eq!(c.slug(), "h-non-heiles-chaotic");
    }
}
