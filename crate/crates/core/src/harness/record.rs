use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::bath::IdentityCheck;
use crate::classical::ScalingFit;
use crate::decoherence::{ComparisonReport, Engine, HartreeErrorEstimate};

pub const RECORD_FILE: &str = "record.json";
pub const SNAPSHOT_FILE: &str = "config.snapshot";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl ManifestEntry {
    pub fn for_file(run_dir: &Path, relative: &str) -> std::io::Result<Self> {
        let data = std::fs::read(run_dir.join(relative))?;
        Ok(Self { path: relative.to_string(), sha256: hex::encode(Sha256::digest(&data)), bytes: data.len() as u64 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    AtMost,
    AtLeast,
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl ToleranceCheck {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, relation: Relation::AtMost, pass: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, relation: Relation::AtLeast, pass: value >= limit }
    }

    pub fn holds(name: &str, pass: bool) -> Self {
        Self { name: name.into(), value: pass as u8 as f64, limit: 1.0, relation: Relation::Holds, pass }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRecord {
    pub lambda_max: f64,
    pub total_time: f64,
    pub renorm_interval: f64,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    /// Series the fit was taken on, e.g. `divergence` or `gamma_classical`.
    pub source: String,
    pub window: (f64, f64),
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
    /// `rate / (2 λ)` for exponential fits when a Lyapunov estimate exists.
    pub rate_over_two_lambda: Option<f64>,
    pub ensemble_members: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub engine: Engine,
    pub temperature: f64,
    pub modes: usize,
    /// Largest `|Γ − γ| / γ` over samples with `ω_max t ≥ 10`.
    pub max_relative_deviation: f64,
    pub final_relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumRecord {
    pub end_time: f64,
    /// Why the packets stopped before `n_steps`, if they did.
    pub truncated: Option<String>,
    pub break_time: Option<f64>,
    pub break_threshold: f64,
    pub min_uncertainty_ratio: f64,
    pub max_norm_drift: f64,
    pub hartree: Option<HartreeErrorEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub label: String,
    pub run_dir: String,
    pub config: ExperimentConfig,
    pub manifest: Vec<ManifestEntry>,
    pub energy: f64,
    pub shell_diameter: Option<f64>,
    pub max_energy_drift: Option<f64>,
    pub lyapunov: Option<LyapunovRecord>,
    pub fits: Vec<FitRecord>,
    pub oracle: Vec<OracleRecord>,
    pub quantum: Option<QuantumRecord>,
    pub ehrenfest_window: Option<(f64, f64)>,
    pub ehrenfest_source: Option<String>,
    pub identity_checks: Vec<IdentityCheck>,
    pub tolerances: Vec<ToleranceCheck>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub status: RunStatus,
    pub started_at: String,
    pub wall_clock_seconds: f64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCheck {
    pub rule: String,
    pub regular: f64,
    pub chaotic: f64,
    pub pass: bool,
}

/// Headline of a comparison: does the chaotic run's exponent overtake for good?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub engine: Engine,
    pub dominance: bool,
    pub crossover: Option<f64>,
    pub window: (f64, f64),
    /// The crossover lies inside both Ehrenfest windows.
    pub crossover_inside_windows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub schema_version: u32,
    pub label: String,
    pub run_dir: String,
    /// Sub-run directories, relative to this one.
    pub regular_run: Option<String>,
    pub chaotic_run: Option<String>,
    pub matching: Vec<MatchCheck>,
    pub reports: Vec<ComparisonReport>,
    pub headline: Option<Headline>,
    pub manifest: Vec<ManifestEntry>,
    pub tolerances: Vec<ToleranceCheck>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub status: RunStatus,
    pub started_at: String,
    pub wall_clock_seconds: f64,
    pub version: String,
}

/// Creates `<root>/<timestamp>-<slug>`, suffixing `-2`, `-3`, … on collision.
pub fn create_run_dir(root: &Path, slug: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ");
    for k in 1.. {
        let name = if k == 1 { format!("{stamp}-{slug}") } else { format!("{stamp}-{slug}-{k}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(HarnessError::io(&dir, e)),
        }
    }
    unreachable!()
}

/// Checks every manifest entry against the files on disk.
pub fn verify_manifest(run_dir: &Path, manifest: &[ManifestEntry]) -> Result<(), String> {
    for entry in manifest {
        let now = ManifestEntry::for_file(run_dir, &entry.path).map_err(|e| format!("{}: {e}", entry.path))?;
        if now != *entry {
            return Err(format!("{}: checksum mismatch", entry.path));
        }
    }
    Ok(())
}
