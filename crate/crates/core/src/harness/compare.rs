use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{ExperimentConfig, SCHEMA_VERSION};
use super::csv::{self, Column};
use super::record::*;
use super::run::{run_in_dir, ExperimentOutcome, Stage};
use super::HarnessError;
use crate::decoherence::{compare_regimes, ComparisonReport, Engine, RegimeRun};

/// Relative tolerance of every matching rule.
pub const MATCH_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub record: ComparisonRecord,
    pub dir: PathBuf,
    pub regular: Option<ExperimentOutcome>,
    pub chaotic: Option<ExperimentOutcome>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_TOLERANCE * a.abs().max(b.abs())
}

/// The four matching rules: coupling, temperature, offset size and energy.
pub fn matching_checks(regular: &ExperimentConfig, chaotic: &ExperimentConfig) -> Vec<MatchCheck> {
    let rules = [
        ("bath coupling C", regular.bath.c, chaotic.bath.c),
        ("bath temperature T", regular.bath.temperature, chaotic.bath.temperature),
        ("offset |delta_z|", regular.initial.delta_z().norm(), chaotic.initial.delta_z().norm()),
        ("energy", regular.energy(), chaotic.energy()),
    ];
    rules
        .into_iter()
        .map(|(rule, r, c)| MatchCheck { rule: rule.into(), regular: r, chaotic: c, pass: close(r, c) })
        .collect()
}

fn regime_run(label: &str, outcome: &ExperimentOutcome, engine: Engine) -> Option<RegimeRun> {
    let gamma = outcome.gamma_for(engine)?.clone();
    let window = outcome.record.ehrenfest_window?;
    let classical = engine == Engine::Classical;
    Some(RegimeRun {
        label: label.into(),
        engine,
        gamma,
        divergence: if classical { outcome.fit_divergence.clone() } else { None },
        ehrenfest_window: window,
        fit_window: if classical { outcome.fit_window } else { None },
    })
}

fn new_record(dir: &Path, label: String) -> ComparisonRecord {
    ComparisonRecord {
        schema_version: SCHEMA_VERSION,
        label,
        run_dir: dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        regular_run: None,
        chaotic_run: None,
        matching: Vec::new(),
        reports: Vec::new(),
        headline: None,
        manifest: Vec::new(),
        tolerances: Vec::new(),
        warnings: Vec::new(),
        errors: Vec::new(),
        status: RunStatus::Complete,
        started_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        wall_clock_seconds: 0.0,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn write_report(dir: &Path, record: &mut ComparisonRecord, report: &ComparisonReport) -> Result<(), HarnessError> {
    let name = format!("comparison_{}.csv", report.engine.1.tag());
    let path = dir.join(&name);
    csv::write(
        &path,
        &[
            Column::Num("t", &report.t),
            Column::Num("gamma_regular", &report.gamma_regular),
            Column::Num("gamma_chaotic", &report.gamma_chaotic),
            Column::Num("ratio", &report.ratio),
            Column::Const("engine", report.engine.1.tag()),
        ],
    )
    .map_err(|e| HarnessError::io(&path, e))?;
    record.manifest.push(ManifestEntry::for_file(dir, &name).map_err(|e| HarnessError::io(&path, e))?);
    Ok(())
}

/// Fills reports, headline and tolerances from paired runs, then writes all
/// comparison-level files.
fn finish(
    dir: &Path,
    record: &mut ComparisonRecord,
    pairs: Vec<(RegimeRun, RegimeRun)>,
    clock: Instant,
) -> Result<(), HarnessError> {
    for (reg, cha) in &pairs {
        match compare_regimes(reg, cha, &reg.gamma.t) {
            Ok(report) => {
                write_report(dir, record, &report)?;
                record.reports.push(report);
            }
            Err(e) => record.errors.push(format!("{} engine: {e}", reg.engine.tag())),
        }
    }
    let primary = record
        .reports
        .iter()
        .find(|r| r.engine.1 == Engine::Classical)
        .or_else(|| record.reports.first())
        .cloned();
    if let Some(report) = primary {
        let (reg, cha) = pairs.iter().find(|(r, _)| r.engine == report.engine.1).expect("report has a pair");
        let inside = |x: f64, w: (f64, f64)| x >= w.0 && x <= w.1;
        let crossover_inside_windows = report
            .crossover
            .is_some_and(|x| inside(x, reg.ehrenfest_window) && inside(x, cha.ehrenfest_window));
        record.tolerances.push(ToleranceCheck::holds("chaotic_dominance", report.dominance));
        record.tolerances.push(ToleranceCheck::holds("crossover_inside_ehrenfest_windows", crossover_inside_windows));
        record.headline = Some(Headline {
            engine: report.engine.1,
            dominance: report.dominance,
            crossover: report.crossover,
            window: report.window,
            crossover_inside_windows,
        });
    } else if record.errors.is_empty() {
        record.errors.push("no engine produced gamma series for both runs".into());
    }
    if !record.errors.is_empty() {
        record.status = RunStatus::Failed;
    }
    record.wall_clock_seconds = clock.elapsed().as_secs_f64();
    let path = dir.join(RECORD_FILE);
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    std::fs::write(&path, json + "\n").map_err(|e| HarnessError::io(&path, e))
}

/// Runs both configs and compares their decoherence exponents.
///
/// Layout: `<root>/<timestamp>-compare-<regular>-vs-<chaotic>/` holding
/// `regular/` and `chaotic/` run directories plus the comparison files.
pub fn compare_command(
    regular: &ExperimentConfig,
    chaotic: &ExperimentConfig,
    out_root: &Path,
) -> Result<ComparisonOutcome, HarnessError> {
    let mut invalid = Vec::new();
    for (side, c) in [("regular", regular), ("chaotic", chaotic)] {
        if let Err(v) = c.validate() {
            invalid.extend(v.into_iter().map(|e| format!("{side}: {e}")));
        }
    }
    if !invalid.is_empty() {
        return Err(HarnessError::Invalid(invalid));
    }
    let matching = matching_checks(regular, chaotic);
    let failed: Vec<String> = matching
        .iter()
        .filter(|m| !m.pass)
        .map(|m| format!("{} differs by more than 1% ({} vs {})", m.rule, m.regular, m.chaotic))
        .collect();
    if !failed.is_empty() {
        return Err(HarnessError::Mismatch(failed.join("; ")));
    }

    let clock = Instant::now();
    let slug = format!("compare-{}-vs-{}", regular.slug(), chaotic.slug());
    let dir = create_run_dir(out_root, &slug)?;
    let mut record = new_record(&dir, slug);
    record.matching = matching;

    let mut outcomes = Vec::new();
    for (side, config) in [("regular", regular), ("chaotic", chaotic)] {
        let sub = dir.join(side);
        std::fs::create_dir(&sub).map_err(|e| HarnessError::io(&sub, e))?;
        let out = run_in_dir(config, &sub, Stage::Decohere)?;
        for e in &out.record.errors {
            record.errors.push(format!("{side} run: {e}"));
        }
        outcomes.push(out);
    }
    let chaotic_out = outcomes.pop().unwrap();
    let regular_out = outcomes.pop().unwrap();
    record.regular_run = Some("regular".into());
    record.chaotic_run = Some("chaotic".into());

    let mut pairs = Vec::new();
    for engine in [Engine::Classical, Engine::Quantum] {
        if let (Some(r), Some(c)) =
            (regime_run(&regular.label, &regular_out, engine), regime_run(&chaotic.label, &chaotic_out, engine))
        {
            pairs.push((r, c));
        }
    }
    finish(&dir, &mut record, pairs, clock)?;
    Ok(ComparisonOutcome { record, dir, regular: Some(regular_out), chaotic: Some(chaotic_out) })
}

/// Comparison of externally supplied runs, bypassing the engines. Writes the
/// same comparison files as [`compare_command`].
pub fn compare_injected(
    regular: RegimeRun,
    chaotic: RegimeRun,
    out_root: &Path,
) -> Result<ComparisonOutcome, HarnessError> {
    let clock = Instant::now();
    let slug = format!("compare-injected-{}-vs-{}", regular.label, chaotic.label)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '-' })
        .collect::<String>();
    let dir = create_run_dir(out_root, &slug)?;
    let mut record = new_record(&dir, slug);
    finish(&dir, &mut record, vec![(regular, chaotic)], clock)?;
    Ok(ComparisonOutcome { record, dir, regular: None, chaotic: None })
}
