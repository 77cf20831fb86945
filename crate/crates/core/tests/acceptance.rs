//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chaodeco::bath::{
    decoherence_exponent_oracle, discretize_bath, ensure_identity_verified, verify_displacement_identity,
    DriveDifference, SpectralDensity, IDENTITY_TOLERANCE,
};
use chaodeco::classical::{
    divergence_integral, ensemble_divergence, max_lyapunov, Propagator, ScalingKind,
};
use chaodeco::decoherence::{asymptotic_exponent, hartree_error, special::ci, weight_w};
use chaodeco::harness::{compare_command, load_config, run_experiment, ExperimentConfig, Stage, RECORD_FILE};
use chaodeco::quantum::{init_gaussian, propagate_wavepacket, ExpectationSeries, Grid2D};
use chaodeco::{HamiltonianModel, PhasePoint};
use num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

type Variant = (&'static str, fn(ExperimentConfig) -> ExperimentConfig);
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Largest relative oracle/asymptote gap at `ω_max t = 100` for a constant
/// and a harmonic drive.
fn oracle_gap(temperature: f64, modes: usize) -> f64 {
    let omega_max = 5.0;
    let dt = 0.01;
    let n = 2001;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let sd = SpectralDensity::new(1.0, omega_max).unwrap();
    let bath = discretize_bath(&sd, modes).unwrap();
    let drives: [Vec<f64>; 2] = [vec![0.1; n], t.iter().map(|s| 0.1 * s.cos()).collect()];
    drives
        .iter()
        .map(|dx| {
            let dd = DriveDifference::new(t.clone(), dx.clone(), vec![0.0; n]).unwrap();
            let oracle = decoherence_exponent_oracle(&bath, &dd, temperature).unwrap();
            let asym = asymptotic_exponent(&dd, 1.0, temperature).unwrap();
            rel(oracle[n - 1], asym.gamma[n - 1])
        })
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let base = oracle_gap(500.0, 10_000);
    let tight = oracle_gap(5_000.0, 100_000);
    // At fixed `ω_max t` the residual gap is set by the band edge, so the
    // tenfold run is reported against the base run rather than gated on it.
    let trend = if tight < base { "decreasing" } else { "not decreasing" };
    outcome(
        base <= 0.05 && tight <= 0.01,
        format!(
            "gap {base:.6e} at T=100 w_max, N=1e4 (limit 5e-2); {tight:.6e} at T=1000 w_max, N=1e5 (limit 1e-2); {trend}, change {:+.1e}",
            tight - base
        ),
    )
}

fn criterion_2() -> Outcome {
    let sq = HamiltonianModel::separable_quartic(1.0, 1.0);
    let z0 = PhasePoint::new(0.3, 0.7, 0.5, -0.2);
    let prop = Propagator::new(sq, 0.01).with_sample_every(10);
    let reference = prop.propagate(z0, 40_000).unwrap();
    let period = reference.estimate_period().unwrap();
    let s = divergence_integral(&sq, z0, PhasePoint::new(0.0, 0.0, 1e-7, 0.0), 0.01, 40_000).unwrap();
    let fit = s.classify(s.regular_window(period)).unwrap();
    let scaling_ok = fit.kind == ScalingKind::PowerLaw && (fit.exponent_or_rate - 3.0).abs() <= 0.2 && fit.r_squared >= 0.999;

    let free = HamiltonianModel::separable_quartic(0.0, 0.0);
    let dp = 1e-3;
    let f = divergence_integral(&free, PhasePoint::new(0.1, -0.2, 0.7, 0.3), PhasePoint::new(0.0, 0.0, dp, 0.0), 0.01, 2000)
        .unwrap();
    let free_err = f.t.iter().zip(&f.d).skip(1).map(|(t, d)| rel(*d, dp * dp * t.powi(3) / 3.0)).fold(0.0, f64::max);
    outcome(
        scaling_ok && free_err <= 1e-8,
        format!(
            "exponent {:.4} (r2 {:.6}) over [{:.1}, {:.1}]; free-motion max rel err {free_err:.2e}",
            fit.exponent_or_rate, fit.r_squared, fit.window.0, fit.window.1
        ),
    )
}

fn criterion_3() -> Outcome {
    let hh = HamiltonianModel::henon_heiles(1.0);
    let energy = 1.0 / 6.2;
    let y0 = -0.2;
    let v = hh.potential([0.0, y0]).unwrap();
    let z0 = PhasePoint::new(0.0, y0, (2.0 * (energy - v)).sqrt(), 0.0);
    let lam = max_lyapunov(&hh, z0, 0.01, 1e5, 1.0, 1).unwrap().lambda_max;
    let lam_half = max_lyapunov(&hh, z0, 0.005, 1e5, 1.0, 1).unwrap().lambda_max;
    let diameter = hh.shell_diameter(energy).unwrap();
    let delta = 1e-10 * diameter;
    let prop = Propagator::new(hh, 0.01).with_sample_every(10);
    let ens = ensemble_divergence(&prop, z0, delta, 64, 3700, 40_000, 11).unwrap();
    let fit = ens.classify(ens.chaotic_window(delta, 10.0, diameter)).unwrap();
    let ratio = fit.exponent_or_rate / (2.0 * lam);
    let dt_shift = rel(lam_half, lam);
    outcome(
        fit.kind == ScalingKind::Exponential && (ratio - 1.0).abs() <= 0.2 && dt_shift <= 0.02,
        format!(
            "rate {:.4} (r2 {:.4}), 2*lambda {:.4}, ratio {ratio:.3}; lambda {lam:.5} vs {lam_half:.5} at dt/2 ({:.2}%)",
            fit.exponent_or_rate,
            fit.r_squared,
            2.0 * lam,
            100.0 * dt_shift
        ),
    )
}

fn criterion_4() -> Outcome {
    let z = PhasePoint::new(0.4, -0.3, 0.1, 0.5);
    let harmonic = max_lyapunov(&HamiltonianModel::harmonic(1.0, 1.3), z, 0.01, 2e4, 1.0, 3).unwrap().lambda_max;
    let saddle =
        max_lyapunov(&HamiltonianModel::inverted_harmonic(1.0), PhasePoint::ZERO, 0.01, 1000.0, 1.0, 3).unwrap().lambda_max;
    outcome(
        harmonic.abs() <= 1e-3 && (saddle - 1.0).abs() <= 0.02,
        format!("lambda(harmonic) {harmonic:.2e}; lambda(inverted, k=1) {saddle:.5}"),
    )
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // Coherent state in an anisotropic oscillator.
    let hbar = 0.05;
    let (wx, wy) = (1.0, 1.3);
    let model = HamiltonianModel::harmonic(wx, wy);
    let grid = Grid2D::new(128, 128, 4.0, 4.0, hbar).unwrap();
    let z = PhasePoint::new(0.5, -0.3, 0.2, 0.4);
    let widths = ((hbar / (2.0 * wx)).sqrt(), (hbar / (2.0 * wy)).sqrt());
    let dt = 1e-3;
    let mut st = init_gaussian(&grid, z, widths).unwrap();
    let series = propagate_wavepacket(&mut st, &model, dt, 10_000, 100).unwrap();
    let norm_drift = series.norm.iter().map(|n| (n - series.norm[0]).abs()).fold(0.0, f64::max);
    let mean_err = series
        .t
        .iter()
        .zip(&series.mean_q)
        .map(|(t, q)| {
            let x = z.qx * (wx * t).cos() + z.px / wx * (wx * t).sin();
            let y = z.qy * (wy * t).cos() + z.py / wy * (wy * t).sin();
            (q[0] - x).abs().max((q[1] - y).abs())
        })
        .fold(0.0, f64::max);
    let var_err = series
        .var_q
        .iter()
        .map(|v| (v[0] - widths.0.powi(2)).abs().max((v[1] - widths.1.powi(2)).abs()))
        .fold(0.0, f64::max);
    let ratio_h = series.min_uncertainty_ratio(hbar);
    pass &= norm_drift <= 1e-10 && mean_err <= 1e-6 && var_err <= 1e-6;
    notes.push(format!("norm drift {norm_drift:.1e}/1e4 steps, <q> err {mean_err:.1e}, var err {var_err:.1e}"));

    // Free spreading.
    let free = HamiltonianModel::separable_quartic(0.0, 0.0);
    let grid = Grid2D::new(256, 256, 8.0, 8.0, hbar).unwrap();
    let z = PhasePoint::new(-0.5, 0.2, 0.3, -0.1);
    let s0 = (0.2, 0.3);
    let mut st = init_gaussian(&grid, z, s0).unwrap();
    let free_series = propagate_wavepacket(&mut st, &free, 0.01, 300, 20).unwrap();
    let spread_err = free_series
        .t
        .iter()
        .zip(free_series.mean_q.iter().zip(&free_series.var_q))
        .map(|(t, (q, v))| {
            let vx = s0.0 * s0.0 + (hbar * t / (2.0 * s0.0)).powi(2);
            let vy = s0.1 * s0.1 + (hbar * t / (2.0 * s0.1)).powi(2);
            let e = [(q[0] - z.qx - z.px * t).abs(), (q[1] - z.qy - z.py * t).abs(), (v[0] - vx).abs(), (v[1] - vy).abs()];
            e.into_iter().fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let ratio_f = free_series.min_uncertainty_ratio(hbar);
    let min_ratio = ratio_h.min(ratio_f);
    pass &= spread_err <= 1e-6 && min_ratio >= 1.0 - 1e-8;
    notes.push(format!("free spreading err {spread_err:.1e}, min dq*dp/(hbar/2) {min_ratio:.8}"));
    outcome(pass, notes.join("; "))
}

fn halve_dt(mut c: ExperimentConfig) -> ExperimentConfig {
    let q_dt = c.quantum_dt();
    c.integrator.dt *= 0.5;
    c.integrator.n_steps *= 2;
    c.integrator.sample_every *= 2;
    if let Some(q) = c.quantum.as_mut() {
        q.dt = Some(0.5 * q_dt);
        q.n_steps *= 2;
        q.sample_every *= 2;
    }
    c
}

fn halve_offset(mut c: ExperimentConfig) -> ExperimentConfig {
    for v in c.initial.delta_z.iter_mut() {
        *v *= 0.5;
    }
    c
}

fn criterion_6(root: &Path) -> Outcome {
    let regular = load_config(&configs_dir().join("regular_separable_quartic.toml")).unwrap();
    let chaotic = load_config(&configs_dir().join("chaotic_henon_heiles.toml")).unwrap();
    let variants: [Variant; 3] =
        [("baseline", |c| c), ("dt/2", halve_dt), ("|dz|/2", halve_offset)];
    let mut pass = true;
    let mut base = None;
    let mut notes = Vec::new();
    for (name, f) in variants {
        let out = compare_command(&f(regular.clone()), &f(chaotic.clone()), root).unwrap();
        let Some(h) = out.record.headline else {
            return outcome(false, format!("{name}: no headline ({})", out.record.errors.join("; ")));
        };
        pass &= h.dominance && h.crossover_inside_windows;
        let Some(t_star) = h.crossover else {
            return outcome(false, format!("{name}: no crossover"));
        };
        let shift = base.map_or(0.0, |b| rel(t_star, b));
        base.get_or_insert(t_star);
        pass &= shift <= 0.1;
        notes.push(format!(
            "{name}: dominance {} t* {t_star:.5} in [{:.2}, {:.2}] shift {:.3}%",
            h.dominance,
            h.window.0,
            h.window.1,
            100.0 * shift
        ));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_7() -> Outcome {
    // Cin(Ω) from an independent reference for Ci(1) and the defining series.
    let ci1 = 0.337_403_922_900_968_1;
    let ci_err = (ci(1.0) - ci1).abs();
    let (c, omega_max, t) = (0.7, 30.0, 4.0);
    let n = 801;
    let var = [0.02, 0.05];
    let series = ExpectationSeries {
        t: (0..n).map(|k| k as f64 * t / (n - 1) as f64).collect(),
        mean_q: vec![[0.0; 2]; n],
        var_q: vec![var; n],
        var_p: vec![[1.0; 2]; n],
        norm: vec![1.0; n],
        energy: vec![0.0; n],
    };
    let big = omega_max * t;
    let cin = 0.577_215_664_901_532_9 + big.ln() - ci(big);
    let exact = c / (2.0 * std::f64::consts::PI) * (var[0] + var[1]) * 2.0 * cin;
    let est = hartree_error(&series, c, omega_max, t).unwrap();
    let quad_err = rel(est.value, exact);
    // Bitwise on dyadic points, where `1 - u` is exact; elsewhere `1 - (1 - u)`
    // is off by an ulp, which the phases amplify by `Ω`.
    let dyadic_err = (0..=1024)
        .map(|k| {
            let u = k as f64 / 1024.0;
            (weight_w(u, big).unwrap() - weight_w(1.0 - u, big).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    let sym_err = (0..=1000)
        .map(|k| {
            let u = (k as f64 + 0.1234) / 1001.0;
            let (a, b) = (weight_w(u, big).unwrap(), weight_w(1.0 - u, big).unwrap());
            (a - b).abs() / a.abs().max(b.abs())
        })
        .fold(0.0, f64::max);
    let sym_limit = 8.0 * f64::EPSILON * (1.0 + big);
    // Series/closed-form switch sits at `Ω u = 1e-4`; both endpoints are probed.
    let switch = 1e-4 / big;
    let w = |u: f64| weight_w(u, big).unwrap();
    let jump = [
        (w(switch * (1.0 - 1e-12)) - w(switch * (1.0 + 1e-12))).abs(),
        (w(1.0 - switch * (1.0 - 1e-12)) - w(1.0 - switch * (1.0 + 1e-12))).abs(),
        (w(1e-13) - w(0.0)).abs(),
        (w(1.0 - 1e-13) - w(1.0)).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    outcome(
        quad_err <= 1e-6 && dyadic_err == 0.0 && sym_err <= sym_limit && jump <= 1e-8 && ci_err <= 1e-12,
        format!("quadrature vs closed form {quad_err:.1e}; symmetry {dyadic_err:e} on dyadic u, rel {sym_err:.1e} elsewhere (rounding floor {sym_limit:.1e}); largest jump at the series switch and endpoints {jump:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let fixed = ensure_identity_verified();
    let extra = [(Complex64::new(0.4, 0.1), 1.0), (Complex64::new(-0.15, 0.2), 12.0)]
        .map(|(mu, nbar)| verify_displacement_identity(mu, nbar, 400).abs_error());
    let worst = fixed
        .as_ref()
        .map(|c| c.iter().map(|x| x.abs_error()).fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY)
        .max(extra[0])
        .max(extra[1]);
    outcome(fixed.is_ok() && worst <= IDENTITY_TOLERANCE, format!("worst |closed - brute| {worst:.1e}"))
}

fn criterion_9(root: &Path) -> Outcome {
    let mut c = load_config(&configs_dir().join("chaotic_henon_heiles.toml")).unwrap();
    c.integrator.n_steps = 4000;
    c.lyapunov.total_time = 2000.0;
    c.fit.ensemble_members = 8;
    let q = c.quantum.as_mut().unwrap();
    (q.nx, q.ny, q.lx, q.ly, q.n_steps) = (256, 256, 4.0, 4.0, 300);
    let a = run_experiment(&c, &root.join("a"), Stage::Decohere).unwrap();
    let b = run_experiment(&c, &root.join("b"), Stage::Decohere).unwrap();
    let mut files = 0;
    let mut differ = Vec::new();
    for e in &a.record.manifest {
        files += 1;
        let x = std::fs::read(a.dir.join(&e.path)).unwrap();
        let y = std::fs::read(b.dir.join(&e.path)).unwrap_or_default();
        if x != y {
            differ.push(e.path.clone());
        }
    }
    let same_manifest = a.record.manifest == b.record.manifest;
    let record_present = a.dir.join(RECORD_FILE).exists();
    outcome(
        differ.is_empty() && same_manifest && files > 5 && record_present,
        format!("{files} files compared, differing: {differ:?}"),
    )
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("1 oracle-asymptote convergence", Box::new(criterion_1)),
        ("2 regular cubic scaling", Box::new(criterion_2)),
        ("3 chaotic exponential scaling", Box::new(criterion_3)),
        ("4 lyapunov validation", Box::new(criterion_4)),
        ("5 quantum engine", Box::new(criterion_5)),
        ("6 chaotic dominance headline", Box::new(|| criterion_6(&root.path().join("compare")))),
        ("7 hartree error functional", Box::new(criterion_7)),
        ("8 bath identity check", Box::new(criterion_8)),
        ("9 determinism", Box::new(|| criterion_9(&root.path().join("determinism")))),
    ];
    // Positional arguments select criteria by number; flags from the test runner are ignored.
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<_> =
        criteria.iter().filter(|(name, _)| only.is_empty() || only.iter().any(|n| name.split(' ').next() == Some(n))).collect();
    let mut failed = 0;
    for (name, check) in &selected {
        let clock = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            clock.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", selected.len() - failed, selected.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
