use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{ExperimentConfig, FitPolicy};
use super::csv::{self, Column};
use super::record::*;
use super::HarnessError;
use crate::bath::{decoherence_exponent_oracle, IDENTITY_TOLERANCE, discretize_bath, ensure_identity_verified, DriveDifference, SpectralDensity};
use crate::classical::{ensemble_divergence, max_lyapunov_with, DivergenceSeries, Propagator, ScalingKind, Trajectory};
use crate::decoherence::{asymptotic_exponent, hartree_error, DecoherenceSeries, Engine};
use crate::quantum::{ehrenfest_break_time, init_gaussian, ExpectationSeries, QuantumError, SplitOperator};

/// Largest classical energy drift recorded as passing.
pub const ENERGY_DRIFT_TOLERANCE: f64 = 1e-8;
/// Largest oracle/asymptote mismatch recorded as passing.
pub const ORACLE_TOLERANCE: f64 = 0.05;
/// Oracle comparisons start once `ω_max t` reaches this.
const ORACLE_MIN_OMEGA_T: f64 = 10.0;

/// Which parts of the pipeline to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Trajectories, divergence and wavepacket moments.
    Propagate,
    /// Lyapunov estimate only.
    Lyapunov,
    /// The full pipeline.
    Decohere,
}

/// In-memory products of a run, beyond what the record stores.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub record: RunRecord,
    pub dir: PathBuf,
    pub gamma: Vec<DecoherenceSeries>,
    pub gamma_engines: Vec<Engine>,
    /// Divergence series the scaling fit was taken on.
    pub fit_divergence: Option<DivergenceSeries>,
    pub fit_window: Option<(f64, f64)>,
}

impl ExperimentOutcome {
    pub fn gamma_for(&self, engine: Engine) -> Option<&DecoherenceSeries> {
        self.gamma_engines.iter().position(|e| *e == engine).map(|k| &self.gamma[k])
    }
}

struct Writer<'a> {
    dir: &'a Path,
    manifest: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, columns: &[Column<'_>]) -> Result<(), HarnessError> {
        self.text(name, &csv::render(columns))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
        self.manifest.push(ManifestEntry::for_file(self.dir, name).map_err(|e| HarnessError::io(&path, e))?);
        Ok(())
    }
}

fn trajectory_columns(tr: &Trajectory) -> [Vec<f64>; 5] {
    let mut cols: [Vec<f64>; 5] = Default::default();
    for z in &tr.z {
        for (c, v) in cols.iter_mut().zip(z.to_array()) {
            c.push(v);
        }
    }
    cols[4] = tr.energy.clone();
    cols
}

fn write_trajectory(w: &mut Writer<'_>, name: &str, tr: &Trajectory) -> Result<(), HarnessError> {
    let [qx, qy, px, py, e] = trajectory_columns(tr);
    w.csv(
        name,
        &[
            Column::Num("t", &tr.t),
            Column::Num("qx", &qx),
            Column::Num("qy", &qy),
            Column::Num("px", &px),
            Column::Num("py", &py),
            Column::Num("energy", &e),
        ],
    )
}

fn write_divergence(w: &mut Writer<'_>, name: &str, d: &DivergenceSeries) -> Result<(), HarnessError> {
    let dqx: Vec<f64> = d.dq.iter().map(|v| v[0]).collect();
    let dqy: Vec<f64> = d.dq.iter().map(|v| v[1]).collect();
    w.csv(
        name,
        &[
            Column::Num("t", &d.t),
            Column::Num("d", &d.d),
            Column::Num("separation", &d.separation),
            Column::Num("dqx", &dqx),
            Column::Num("dqy", &dqy),
        ],
    )
}

fn write_expectations(w: &mut Writer<'_>, name: &str, s: &ExpectationSeries) -> Result<(), HarnessError> {
    let col = |f: fn(&[f64; 2]) -> f64, v: &[[f64; 2]]| v.iter().map(f).collect::<Vec<f64>>();
    let (mx, my) = (col(|a| a[0], &s.mean_q), col(|a| a[1], &s.mean_q));
    let (vx, vy) = (col(|a| a[0], &s.var_q), col(|a| a[1], &s.var_q));
    w.csv(
        name,
        &[
            Column::Num("t", &s.t),
            Column::Num("mean_qx", &mx),
            Column::Num("mean_qy", &my),
            Column::Num("var_qx", &vx),
            Column::Num("var_qy", &vy),
        ],
    )
}

/// Asymptotic exponent, optional oracle, CSV and oracle record for one drive.
struct GammaProducts {
    series: DecoherenceSeries,
    oracle: Option<OracleRecord>,
}

fn gamma_stage(
    config: &ExperimentConfig,
    engine: Engine,
    dd: &DriveDifference,
    w: &mut Writer<'_>,
    identity: &mut Vec<crate::bath::IdentityCheck>,
) -> Result<GammaProducts, HarnessError> {
    let bath = &config.bath;
    let series = asymptotic_exponent(dd, bath.c, bath.temperature).map_err(HarnessError::stage("asymptotic exponent"))?;
    let mut oracle_values = None;
    let mut oracle = None;
    if bath.oracle {
        let checks = ensure_identity_verified().map_err(HarnessError::stage("displacement identity"))?;
        if identity.is_empty() {
            identity.extend_from_slice(checks);
        }
        let sd = SpectralDensity::new(bath.c, bath.omega_max).map_err(HarnessError::stage("bath"))?;
        let disc = discretize_bath(&sd, bath.modes).map_err(HarnessError::stage("bath"))?;
        let values = decoherence_exponent_oracle(&disc, dd, bath.temperature).map_err(HarnessError::stage("oracle"))?;
        let (mut max_dev, mut last_dev) = (0.0f64, f64::NAN);
        for ((t, g), o) in series.t.iter().zip(&series.gamma).zip(&values) {
            if *g > 0.0 && bath.omega_max * t >= ORACLE_MIN_OMEGA_T {
                let dev = (o - g).abs() / g;
                max_dev = max_dev.max(dev);
                last_dev = dev;
            }
        }
        oracle = Some(OracleRecord {
            engine,
            temperature: bath.temperature,
            modes: bath.modes,
            max_relative_deviation: max_dev,
            final_relative_deviation: last_dev,
        });
        oracle_values = Some(values);
    }
    let name = format!("gamma_{}.csv", engine.tag());
    match &oracle_values {
        Some(o) => w.csv(
            &name,
            &[
                Column::Num("t", &series.t),
                Column::Num("gamma_asymptotic", &series.gamma),
                Column::Num("gamma_oracle", o),
                Column::Const("engine", engine.tag()),
            ],
        )?,
        None => w.csv(
            &name,
            &[Column::Num("t", &series.t), Column::Num("gamma_asymptotic", &series.gamma), Column::Const("engine", engine.tag())],
        )?,
    }
    Ok(GammaProducts { series, oracle })
}

/// Series plus a truncation note, or the partial series and the failure message.
type PacketResult = Result<(ExpectationSeries, Option<String>), (Option<Box<ExpectationSeries>>, String)>;

fn run_packet(
    config: &ExperimentConfig,
    z: crate::models::PhasePoint,
) -> PacketResult {
    let q = config.quantum.as_ref().expect("validated");
    let grid = q.grid();
    let mut state = init_gaussian(&grid, z, (q.widths[0], q.widths[1])).map_err(|e| (None, e.to_string()))?;
    let mut prop = SplitOperator::new(&grid, &config.model, config.quantum_dt()).map_err(|e| (None, e.to_string()))?;
    match prop.run(&mut state, q.n_steps, q.sample_every) {
        Ok(s) => Ok((s, None)),
        Err(QuantumError::BoundaryLeak { t, edge_density, partial }) => {
            Ok((*partial, Some(format!("boundary leak at t = {t} (edge density {edge_density:e})"))))
        }
        Err(e @ QuantumError::NormDrift { .. }) => {
            let msg = e.to_string();
            let QuantumError::NormDrift { partial, .. } = e else { unreachable!() };
            Err((Some(partial), msg))
        }
        Err(e) => Err((None, e.to_string())),
    }
}

fn fit_record(
    source: &str,
    series_t: &[f64],
    series_y: &[f64],
    window: (f64, f64),
    lambda: Option<f64>,
    members: usize,
    delta: f64,
) -> FitRecord {
    let (fit, error) = match crate::classical::classify_scaling(series_t, series_y, window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rate_over_two_lambda = match (&fit, lambda) {
        (Some(f), Some(l)) if f.kind == ScalingKind::Exponential && l > 0.0 => Some(f.exponent_or_rate / (2.0 * l)),
        _ => None,
    };
    FitRecord { source: source.into(), window, fit, error, rate_over_two_lambda, ensemble_members: members, delta }
}

/// Runs the configured experiment into a fresh directory under `out_root`.
///
/// Module failures are captured in the record (status `failed`) and every file
/// written before the failure stays listed in the manifest. Only I/O failures
/// on the run directory itself are returned as errors.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path, stage: Stage) -> Result<ExperimentOutcome, HarnessError> {
    config.validate().map_err(HarnessError::Invalid)?;
    let dir = create_run_dir(out_root, &config.slug())?;
    run_in_dir(config, &dir, stage)
}

pub(crate) fn run_in_dir(config: &ExperimentConfig, dir: &Path, stage: Stage) -> Result<ExperimentOutcome, HarnessError> {
    let clock = Instant::now();
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let mut w = Writer { dir, manifest: Vec::new() };
    w.text(SNAPSHOT_FILE, &config.to_toml())?;

    let mut record = RunRecord {
        schema_version: super::config::SCHEMA_VERSION,
        label: config.label.clone(),
        run_dir: dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        config: config.clone(),
        manifest: Vec::new(),
        energy: config.energy(),
        shell_diameter: config.model.shell_diameter(config.energy()),
        max_energy_drift: None,
        lyapunov: None,
        fits: Vec::new(),
        oracle: Vec::new(),
        quantum: None,
        ehrenfest_window: None,
        ehrenfest_source: None,
        identity_checks: Vec::new(),
        tolerances: Vec::new(),
        warnings: Vec::new(),
        errors: Vec::new(),
        status: RunStatus::Complete,
        started_at,
        wall_clock_seconds: 0.0,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let mut outcome = ExperimentOutcome {
        record: record.clone(),
        dir: dir.to_path_buf(),
        gamma: Vec::new(),
        gamma_engines: Vec::new(),
        fit_divergence: None,
        fit_window: None,
    };

    let result = pipeline(config, stage, &mut w, &mut record, &mut outcome);
    if let Err(e) = result {
        match e {
            HarnessError::Io { .. } => return Err(e),
            other => record.errors.push(other.to_string()),
        }
    }
    if let Some(worst) = record.identity_checks.iter().map(|c| c.abs_error()).reduce(f64::max) {
        record.tolerances.push(ToleranceCheck::at_most("displacement_identity", worst, IDENTITY_TOLERANCE));
    }
    if !record.errors.is_empty() {
        record.status = RunStatus::Failed;
    }
    record.manifest = w.manifest;
    record.wall_clock_seconds = clock.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    let path = dir.join(RECORD_FILE);
    std::fs::write(&path, json + "\n").map_err(|e| HarnessError::io(&path, e))?;
    outcome.record = record;
    Ok(outcome)
}

fn pipeline(
    config: &ExperimentConfig,
    stage: Stage,
    w: &mut Writer<'_>,
    record: &mut RunRecord,
    outcome: &mut ExperimentOutcome,
) -> Result<(), HarnessError> {
    let model = config.model;
    let integ = &config.integrator;
    let z0 = config.initial.z();
    let dz = config.initial.delta_z();
    let mut prop = Propagator::new(model, integ.dt)
        .with_escape_radius(integ.escape_radius)
        .with_sample_every(integ.sample_every);
    if let Some(b) = integ.energy_drift_bound {
        prop = prop.with_energy_drift_bound(b);
    }

    let mut lambda = None;
    if stage != Stage::Propagate && config.lyapunov.enabled {
        let l = &config.lyapunov;
        let lprop = Propagator { dt: config.lyapunov_dt(), sample_every: 1, ..prop };
        let est = max_lyapunov_with(&lprop, z0, l.total_time, l.renorm_interval, config.seed)
            .map_err(HarnessError::stage("lyapunov"))?;
        let (t, v): (Vec<f64>, Vec<f64>) = est.convergence.iter().copied().unzip();
        w.csv("lyapunov.csv", &[Column::Num("t", &t), Column::Num("lambda", &v)])?;
        record.lyapunov = Some(LyapunovRecord {
            lambda_max: est.lambda_max,
            total_time: est.total_time,
            renorm_interval: est.renorm_interval,
            dt: lprop.dt,
            seed: config.seed,
        });
        lambda = Some(est.lambda_max);
    }
    if stage == Stage::Lyapunov {
        return Ok(());
    }

    // Classical pair.
    let reference = prop.propagate(z0, integ.n_steps).map_err(HarnessError::stage("classical reference"))?;
    write_trajectory(w, "trajectory_reference.csv", &reference)?;
    let partner = prop.propagate(z0 + dz, integ.n_steps).map_err(HarnessError::stage("classical partner"))?;
    write_trajectory(w, "trajectory_partner.csv", &partner)?;
    let drift = reference.max_energy_drift();
    record.max_energy_drift = Some(drift);
    record.tolerances.push(ToleranceCheck::at_most("classical_energy_drift", drift, ENERGY_DRIFT_TOLERANCE));
    let divergence = DivergenceSeries::from_trajectories(&reference, &partner, model.mass);
    write_divergence(w, "divergence.csv", &divergence)?;
    let t_end = *reference.t.last().unwrap();

    // Scaling fit of the divergence integral.
    if stage == Stage::Decohere {
        let fit = &config.fit;
        let delta_pair = dz.norm();
        let (series, delta, members) = if fit.policy == FitPolicy::Chaotic && fit.ensemble_members > 1 {
            let delta = fit.ensemble_delta.unwrap_or(delta_pair);
            let spacing = ((fit.ensemble_spacing / integ.dt).round() as usize).max(1);
            let ens = ensemble_divergence(&prop, z0, delta, fit.ensemble_members, spacing, integ.n_steps, config.seed)
                .map_err(HarnessError::stage("divergence ensemble"))?;
            w.csv(
                "divergence_ensemble.csv",
                &[Column::Num("t", &ens.t), Column::Num("d", &ens.d), Column::Num("separation", &ens.separation)],
            )?;
            (ens, delta, fit.ensemble_members)
        } else {
            (divergence.clone(), delta_pair, 1)
        };
        let window = match (fit.window, fit.policy) {
            (Some([lo, hi]), _) => Ok((lo, hi)),
            (None, FitPolicy::Regular) => reference
                .estimate_period()
                .map(|p| series.regular_window(p))
                .ok_or_else(|| "no oscillation period found for the regular window".to_string()),
            (None, FitPolicy::Chaotic) => Ok(match record.shell_diameter {
                Some(diam) => series.chaotic_window(delta, fit.growth_factor, diam),
                None => (series.first_exceeding(fit.growth_factor * delta).unwrap_or(0.0), t_end),
            }),
        };
        match window {
            Ok(window) => {
                let source = if members > 1 { "divergence_ensemble" } else { "divergence" };
                record.fits.push(fit_record(source, &series.t, &series.d, window, lambda, members, delta));
                outcome.fit_window = Some(window);
                outcome.fit_divergence = Some(series);
            }
            Err(msg) => record.warnings.push(format!("scaling fit skipped: {msg}")),
        }
    }

    // Classical drive.
    if stage == Stage::Decohere && config.engine.includes(Engine::Classical) {
        let dd = DriveDifference::from_positions(&reference.t, &reference.positions(), &partner.positions())
            .map_err(HarnessError::stage("classical drive"))?;
        let products = gamma_stage(config, Engine::Classical, &dd, w, &mut record.identity_checks)?;
        if let Some(window) = outcome.fit_window {
            let g = &products.series;
            record.fits.push(fit_record("gamma_classical", &g.t, &g.gamma, window, lambda, 1, dz.norm()));
        }
        if let Some(o) = products.oracle {
            record.tolerances.push(ToleranceCheck::at_most("oracle_vs_asymptotic_classical", o.final_relative_deviation, ORACLE_TOLERANCE));
            record.oracle.push(o);
        }
        outcome.gamma.push(products.series);
        outcome.gamma_engines.push(Engine::Classical);
    }

    // Wavepackets.
    if config.engine.includes(Engine::Quantum) {
        let q = config.quantum.as_ref().expect("validated");
        let (a, b) = rayon::join(|| run_packet(config, z0), || run_packet(config, z0 + dz));
        let mut series = Vec::new();
        let mut truncated = Vec::new();
        let mut failure = None;
        for (name, r) in [("quantum_reference.csv", a), ("quantum_partner.csv", b)] {
            match r {
                Ok((s, note)) => {
                    write_expectations(w, name, &s)?;
                    if let Some(n) = note {
                        truncated.push(format!("{name}: {n}"));
                    }
                    series.push(s);
                }
                Err((partial, msg)) => {
                    if let Some(s) = partial {
                        write_expectations(w, name, &s)?;
                    }
                    failure.get_or_insert(format!("wavepacket {name}: {msg}"));
                }
            }
        }
        if let Some(msg) = failure {
            return Err(HarnessError::Stage(msg));
        }
        let (sa, sb) = (&series[0], &series[1]);
        record.warnings.extend(truncated.iter().map(|t| format!("wavepacket run truncated, {t}")));

        let threshold = match record.shell_diameter {
            Some(d) => q.break_fraction * d,
            None => {
                record.warnings.push("open energy shell: break threshold taken relative to the box size".into());
                q.break_fraction * q.lx.min(q.ly)
            }
        };
        let cprop = Propagator { dt: config.quantum_dt(), sample_every: q.sample_every, ..prop };
        let classical = cprop.propagate(z0, q.n_steps).map_err(HarnessError::stage("classical centre"))?;
        let break_time = ehrenfest_break_time(sa, &classical, threshold).map_err(HarnessError::stage("break time"))?;
        let end_time = sa.t.last().copied().unwrap_or(0.0).min(sb.t.last().copied().unwrap_or(0.0));
        let (window_end, source) = match break_time {
            Some(tb) => (tb, "break time"),
            None if truncated.is_empty() => (end_time, "no break within the wavepacket run"),
            None => (end_time, "no break before the wavepacket run was truncated"),
        };
        record.ehrenfest_window = Some((0.0, window_end));
        record.ehrenfest_source = Some(source.into());

        let norm0 = sa.norm[0];
        let max_norm_drift = sa.norm.iter().chain(&sb.norm).map(|n| (n - norm0).abs()).fold(0.0, f64::max);
        let min_ratio = sa.min_uncertainty_ratio(q.hbar).min(sb.min_uncertainty_ratio(q.hbar));
        record.tolerances.push(ToleranceCheck::at_most("quantum_norm_drift", max_norm_drift, 1e-8));
        record.tolerances.push(ToleranceCheck::at_least("uncertainty_ratio", min_ratio, 1.0 - 1e-8));

        let mut hartree = None;
        if stage == Stage::Decohere && end_time > 0.0 {
            match hartree_error(sa, config.bath.c, config.bath.omega_max, end_time) {
                Ok(h) => {
                    if let Some(warn) = &h.warning {
                        record.warnings.push(format!("hartree error: {warn}"));
                    }
                    hartree = Some(h);
                }
                Err(e) => record.warnings.push(format!("hartree error skipped: {e}")),
            }
        }
        record.quantum = Some(QuantumRecord {
            end_time,
            truncated: (!truncated.is_empty()).then(|| truncated.join("; ")),
            break_time,
            break_threshold: threshold,
            min_uncertainty_ratio: min_ratio,
            max_norm_drift,
            hartree,
        });

        if stage == Stage::Decohere {
            let n = sa.len().min(sb.len());
            let dd = DriveDifference::from_positions(&sa.t[..n], &sa.mean_q[..n], &sb.mean_q[..n])
                .map_err(HarnessError::stage("quantum drive"))?;
            let products = gamma_stage(config, Engine::Quantum, &dd, w, &mut record.identity_checks)?;
            if let Some(o) = products.oracle {
                record.tolerances.push(ToleranceCheck::at_most("oracle_vs_asymptotic_quantum", o.final_relative_deviation, ORACLE_TOLERANCE));
                record.oracle.push(o);
            }
            outcome.gamma.push(products.series);
            outcome.gamma_engines.push(Engine::Quantum);
        }
    } else {
        record.ehrenfest_window = Some((0.0, t_end));
        record.ehrenfest_source = Some("classical run span (no wavepacket engine)".into());
    }
    Ok(())
}
