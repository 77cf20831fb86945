use std::collections::BTreeSet;
use std::path::Path;

use chaodeco::decoherence::{DecoherenceSeries, Engine, RegimeRun};
use chaodeco::harness::{
    compare_command, compare_injected, load_config, run_experiment, verify_manifest, EngineSelection, ExperimentConfig,
    HarnessError, RunStatus, Stage, RECORD_FILE, SNAPSHOT_FILE,
};

const HENON_HEILES: &str = r#"
schema_version = 1
seed = 99
label = "hh-small"
engine = "both"

[model]
family = "HenonHeiles"
lambda = 1.0

[initial]
z = [0.0, -0.2, 0.45240100206196127, 0.0]
delta_z = [0.0, 1.0e-4, 0.0, 0.0]

[integrator]
dt = 0.01
n_steps = 3000
sample_every = 5

[lyapunov]
total_time = 500.0

[bath]
c = 1.0
omega_max = 5.0
temperature = 500.0
modes = 2000

[quantum]
nx = 64
ny = 64
lx = 4.0
ly = 4.0
hbar = 0.05
widths = [0.16, 0.16]
n_steps = 200
sample_every = 5

[fit]
policy = "chaotic"
ensemble_members = 4
ensemble_spacing = 13.0
ensemble_delta = 1.0e-10
"#;

const HARMONIC: &str = r#"
schema_version = 1
seed = 5
label = "harmonic"

[model]
family = "Harmonic2D"
omega_x = 1.0
omega_y = 1.3

[initial]
z = [0.3, 0.0, 0.0, 0.3]
delta_z = [0.0, 0.0, 0.0, 0.0]

[integrator]
dt = 0.01
n_steps = 2000
sample_every = 5

[lyapunov]
enabled = false

[bath]
c = 1.0
omega_max = 5.0
temperature = 100.0
modes = 500
"#;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn files_in(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect()
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let root = tempfile::tempdir().unwrap();
    let c = config(HENON_HEILES);
    let a = run_experiment(&c, &root.path().join("a"), Stage::Decohere).unwrap();
    let b = run_experiment(&c, &root.path().join("b"), Stage::Decohere).unwrap();
    assert_eq!(a.record.manifest, b.record.manifest);
    for e in &a.record.manifest {
        assert_eq!(std::fs::read(a.dir.join(&e.path)).unwrap(), std::fs::read(b.dir.join(&e.path)).unwrap(), "{}", e.path);
    }
}

#[test]
fn every_output_file_is_listed_once_with_a_valid_checksum() {
    let root = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(HENON_HEILES), root.path(), Stage::Decohere).unwrap();
    let listed: Vec<&str> = out.record.manifest.iter().map(|e| e.path.as_str()).collect();
    let unique: BTreeSet<String> = listed.iter().map(|s| s.to_string()).collect();
    assert_eq!(unique.len(), listed.len());
    let mut on_disk = files_in(&out.dir);
    assert!(on_disk.remove(RECORD_FILE));
    assert_eq!(on_disk, unique);
    verify_manifest(&out.dir, &out.record.manifest).unwrap();

    let victim = out.dir.join("divergence.csv");
    let mut text = std::fs::read_to_string(&victim).unwrap();
    text.push('\n');
    std::fs::write(&victim, text).unwrap();
    let err = verify_manifest(&out.dir, &out.record.manifest).unwrap_err();
    assert!(err.contains("divergence.csv"), "{err}");
}

#[test]
fn snapshot_reloads_to_the_same_config() {
    let root = tempfile::tempdir().unwrap();
    let c = config(HENON_HEILES);
    let out = run_experiment(&c, root.path(), Stage::Propagate).unwrap();
    assert_eq!(load_config(&out.dir.join(SNAPSHOT_FILE)).unwrap(), c);
    let stored: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.dir.join(RECORD_FILE)).unwrap()).unwrap();
    let again: ExperimentConfig = serde_json::from_value(stored["config"].clone()).unwrap();
    assert_eq!(again, c);
}

#[test]
fn record_carries_lyapunov_fits_oracle_and_identity_checks() {
    let root = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(HENON_HEILES), root.path(), Stage::Decohere).unwrap();
    let r = &out.record;
    assert_eq!(r.status, RunStatus::Complete, "{:?}", r.errors);
    assert!(r.lyapunov.as_ref().is_some_and(|l| l.lambda_max > 0.0));
    let sources: Vec<&str> = r.fits.iter().map(|f| f.source.as_str()).collect();
    assert!(sources.contains(&"divergence_ensemble") && sources.contains(&"gamma_classical"), "{sources:?}");
    assert!(!r.oracle.is_empty());
    assert!(!r.identity_checks.is_empty());
    assert!(r.quantum.is_some() && r.ehrenfest_window.is_some());
    let files = files_in(&out.dir);
    for name in ["lyapunov.csv", "divergence.csv", "gamma_classical.csv", "quantum_reference.csv", "gamma_quantum.csv"] {
        assert!(files.contains(name), "{name} missing from {files:?}");
    }
    assert!(out.gamma_for(Engine::Classical).is_some() && out.gamma_for(Engine::Quantum).is_some());
}

#[test]
fn propagate_stage_skips_lyapunov_and_decoherence() {
    let root = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(HENON_HEILES), root.path(), Stage::Propagate).unwrap();
    let files = files_in(&out.dir);
    assert!(files.contains("divergence.csv"));
    assert!(!files.contains("lyapunov.csv") && !files.contains("gamma_classical.csv"), "{files:?}");
}

#[test]
fn zero_offset_gives_zero_exponent() {
    let root = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(HARMONIC), root.path(), Stage::Decohere).unwrap();
    let g = out.gamma_for(Engine::Classical).unwrap();
    assert!(!g.gamma.is_empty());
    assert!(g.gamma.iter().all(|x| *x == 0.0));
}

#[test]
fn boundary_leak_truncates_the_ehrenfest_window() {
    let mut c = config(HENON_HEILES);
    c.engine = EngineSelection::Quantum;
    c.initial.z = [0.0, -0.2, (2.0 * (1.0 / 6.3 - 0.02 - 0.008 / 3.0_f64)).sqrt(), 0.0];
    let q = c.quantum.as_mut().unwrap();
    (q.lx, q.ly, q.n_steps) = (3.0, 3.0, 2000);
    let root = tempfile::tempdir().unwrap();
    let out = run_experiment(&c, root.path(), Stage::Decohere).unwrap();
    let r = &out.record;
    let q = r.quantum.as_ref().unwrap();
    assert!(q.truncated.is_some());
    assert!(q.end_time < 20.0);
    assert!(r.ehrenfest_window.unwrap().1 <= q.end_time + 1e-12);
    assert!(r.warnings.iter().any(|w| w.contains("truncated")));
    assert_eq!(r.status, RunStatus::Complete);
}

#[test]
fn runtime_failure_keeps_partial_outputs() {
    let mut c = config(HARMONIC);
    c.initial.delta_z = [1e-4, 0.0, 0.0, 0.0];
    c.integrator.energy_drift_bound = Some(1e-30);
    let root = tempfile::tempdir().unwrap();
    let out = run_experiment(&c, root.path(), Stage::Decohere).unwrap();
    assert_eq!(out.record.status, RunStatus::Failed);
    assert!(!out.record.errors.is_empty());
    let files = files_in(&out.dir);
    assert!(files.contains(SNAPSHOT_FILE) && files.contains(RECORD_FILE));
}

#[test]
fn self_comparison_has_unit_ratio_and_no_dominance() {
    let t: Vec<f64> = (0..200).map(|k| 0.05 * k as f64).collect();
    let gamma: Vec<f64> = t.iter().map(|x| x * x * x).collect();
    let run = |label: &str| RegimeRun {
        label: label.into(),
        engine: Engine::Classical,
        gamma: DecoherenceSeries::from_oracle(t.clone(), gamma.clone()),
        divergence: None,
        ehrenfest_window: (0.0, 9.95),
        fit_window: None,
    };
    let root = tempfile::tempdir().unwrap();
    let out = compare_injected(run("a"), run("b"), root.path()).unwrap();
    let report = &out.record.reports[0];
    assert!(report.ratio.iter().skip(1).all(|r| (r - 1.0).abs() < 1e-15));
    assert!(!report.dominance);
    assert!(files_in(&out.dir).contains("comparison_classical.csv"));
}

#[test]
fn injected_exponential_overtakes_cubic() {
    let t: Vec<f64> = (0..=500).map(|k| 0.02 * k as f64).collect();
    let run = |label: &str, f: fn(f64) -> f64| RegimeRun {
        label: label.into(),
        engine: Engine::Classical,
        gamma: DecoherenceSeries::from_oracle(t.clone(), t.iter().map(|x| f(*x)).collect()),
        divergence: None,
        ehrenfest_window: (0.0, 10.0),
        fit_window: None,
    };
    let root = tempfile::tempdir().unwrap();
    let out = compare_injected(run("cubic", |x| x.powi(3)), run("exp", |x| (x * 0.8).exp_m1()), root.path()).unwrap();
    let h = out.record.headline.unwrap();
    assert!(h.dominance && h.crossover_inside_windows);
    // Bisection on e^{0.8t} - 1 - t^3, bracketed away from the t = 0 touch.
    let f = |x: f64| (0.8 * x).exp_m1() - x.powi(3);
    let (mut lo, mut hi) = (3.0, 10.0);
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((h.crossover.unwrap() - lo).abs() < 0.02, "{:?} vs {lo}", h.crossover);
}

#[test]
fn mismatched_energy_is_rejected_by_name() {
    let regular = config(HARMONIC);
    let chaotic = config(HENON_HEILES);
    let root = tempfile::tempdir().unwrap();
    match compare_command(&regular, &chaotic, root.path()) {
        Err(HarnessError::Mismatch(msg)) => assert!(msg.contains("energy") && msg.contains("offset"), "{msg}"),
        other => panic!("expected a mismatch, got {:?}", other.map(|o| o.dir)),
    }
    assert!(std::fs::read_dir(root.path()).map_or(true, |mut d| d.next().is_none()));
}
