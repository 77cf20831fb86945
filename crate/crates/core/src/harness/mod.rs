//! Experiment orchestration: config files, run directories, CSV and JSON
//! artifacts, and the regular-versus-chaotic comparison.

mod compare;
pub mod config;
pub mod csv;
mod record;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use compare::{compare_command, compare_injected, matching_checks, ComparisonOutcome, MATCH_TOLERANCE};
pub use config::{
    load_config, BathSpec, ConfigError, EngineSelection, ExperimentConfig, FitPolicy, FitSpec, InitialConditions,
    IntegratorSpec, LyapunovSpec, QuantumSpec, Superposition, SCHEMA_VERSION,
};
pub use record::{
    create_run_dir, verify_manifest, ComparisonRecord, FitRecord, Headline, LyapunovRecord, ManifestEntry, MatchCheck,
    OracleRecord, QuantumRecord, Relation, RunRecord, RunStatus, ToleranceCheck, RECORD_FILE, SNAPSHOT_FILE,
};
pub use run::{run_experiment, ExperimentOutcome, Stage, ENERGY_DRIFT_TOLERANCE, ORACLE_TOLERANCE};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CHAODECO_RUNS_DIR";
/// Output root when neither flag, config nor environment names one.
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Stage(String),
    #[error("configs do not match: {0}")]
    Mismatch(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn stage<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> Self {
        move |e| Self::Stage(format!("{name}: {e}"))
    }
}

/// Output root: explicit argument, then the config's `output_dir`, then
/// `$CHAODECO_RUNS_DIR`, then `runs`.
pub fn resolve_output_root(explicit: Option<&Path>, config: Option<&ExperimentConfig>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = config.and_then(|c| c.output_dir.clone()) {
        return p;
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUTPUT_ROOT),
    }
}
