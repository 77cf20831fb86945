use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaodeco::classical::classify_scaling;
use chaodeco::harness::{
    compare_command, csv, load_config, resolve_output_root, run_experiment, ConfigError, EngineSelection,
    ExperimentConfig, HarnessError, RunStatus, Stage, OUTPUT_ROOT_ENV,
};
use clap::{Args, Parser, Subcommand};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "chaodeco", version, about = "Decoherence of adjacent wavepackets in regular and chaotic 2D systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output root; defaults to the config's output_dir, then $CHAODECO_RUNS_DIR, then ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config engine: classical, quantum or both.
    #[arg(long)]
    engine: Option<EngineSelection>,
}

#[derive(Subcommand)]
enum Command {
    /// Classical trajectories, divergence integral and wavepacket moments.
    Propagate(RunArgs),
    /// Largest Lyapunov exponent of the configured orbit.
    Lyapunov(RunArgs),
    /// Full pipeline: fits, decoherence exponents, oracle and error estimate.
    Decohere(RunArgs),
    /// Regular-versus-chaotic comparison; pass `--config` twice (regular first).
    Compare {
        #[arg(long = "config", num_args = 1, required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        engine: Option<EngineSelection>,
    },
    /// Power-law versus exponential fit of one CSV column against `t`.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "d")]
        column: String,
        /// Window `t_lo t_hi`; defaults to the whole series.
        #[arg(long, num_args = 2, value_names = ["T_LO", "T_HI"])]
        window: Option<Vec<f64>>,
    },
    /// Parses and validates a config, listing every violation.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Invalid(_) | HarnessError::Mismatch(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load(path: &Path, seed: Option<u64>, engine: Option<EngineSelection>) -> Result<ExperimentConfig, Failure> {
    let mut config = load_config(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(e) = engine {
        config.engine = e;
    }
    config.validate().map_err(|v| Failure::from(ConfigError::Invalid(v)))?;
    Ok(config)
}

fn run(args: RunArgs, stage: Stage) -> Result<(), Failure> {
    let config = load(&args.config, args.seed, args.engine)?;
    let root = resolve_output_root(args.out.as_deref(), Some(&config));
    let outcome = run_experiment(&config, &root, stage)?;
    let r = &outcome.record;
    println!("run directory: {}", outcome.dir.display());
    if let Some(l) = &r.lyapunov {
        println!("lambda_max: {:.6}", l.lambda_max);
    }
    for f in &r.fits {
        match &f.fit {
            Some(fit) => println!(
                "fit [{}]: {:?} {:.6} (r2 {:.6}) over [{:.3}, {:.3}]",
                f.source, fit.kind, fit.exponent_or_rate, fit.r_squared, f.window.0, f.window.1
            ),
            None => println!("fit [{}]: {}", f.source, f.error.as_deref().unwrap_or("no fit")),
        }
    }
    if let Some(q) = &r.quantum {
        println!("wavepacket end time: {:.3}, break time: {:?}", q.end_time, q.break_time);
    }
    for t in r.tolerances.iter().filter(|t| !t.pass) {
        println!("tolerance not met: {} = {:e} (limit {:e})", t.name, t.value, t.limit);
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    match r.status {
        RunStatus::Complete => Ok(()),
        RunStatus::Failed => Err(Failure::Runtime(r.errors.join("; "))),
    }
}

fn compare(
    configs: Vec<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    engine: Option<EngineSelection>,
) -> Result<(), Failure> {
    let [regular, chaotic] = configs.as_slice() else {
        return Err(Failure::Validation(format!("compare needs exactly two --config paths (got {})", configs.len())));
    };
    let regular = load(regular, seed, engine)?;
    let chaotic = load(chaotic, seed, engine)?;
    let root = resolve_output_root(out.as_deref(), Some(&regular));
    let outcome = compare_command(&regular, &chaotic, &root)?;
    let r = &outcome.record;
    println!("comparison directory: {}", outcome.dir.display());
    for report in &r.reports {
        println!(
            "{} engine: window [{:.3}, {:.3}], crossover {:?}, dominance {}",
            report.engine.1.tag(),
            report.window.0,
            report.window.1,
            report.crossover,
            report.dominance
        );
    }
    if let Some(h) = &r.headline {
        println!(
            "headline ({}): dominance = {}, t* = {:?}, inside both Ehrenfest windows = {}",
            h.engine.tag(),
            h.dominance,
            h.crossover,
            h.crossover_inside_windows
        );
    }
    match r.status {
        RunStatus::Complete => Ok(()),
        RunStatus::Failed => Err(Failure::Runtime(r.errors.join("; "))),
    }
}

fn fit(input: PathBuf, column: String, window: Option<Vec<f64>>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&input).map_err(|e| Failure::Runtime(format!("{}: {e}", input.display())))?;
    let t = csv::read_column(&text, "t").map_err(Failure::Validation)?;
    let y = csv::read_column(&text, &column).map_err(Failure::Validation)?;
    let window = match window.as_deref() {
        Some([lo, hi]) => (*lo, *hi),
        _ => (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(0.0)),
    };
    let fit = classify_scaling(&t, &y, window).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&fit).expect("fit serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Propagate(a) => run(a, Stage::Propagate),
        Command::Lyapunov(a) => run(a, Stage::Lyapunov),
        Command::Decohere(a) => run(a, Stage::Decohere),
        Command::Compare { configs, out, seed, engine } => compare(configs, out, seed, engine),
        Command::Fit { input, column, window } => fit(input, column, window),
        Command::ValidateConfig { config } => load_config(&config).map(|_| println!("{}: valid", config.display())).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime failure: {msg}");
            eprintln!("partial outputs, if any, are kept in the run directory (default root: ${OUTPUT_ROOT_ENV} or ./runs)");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
