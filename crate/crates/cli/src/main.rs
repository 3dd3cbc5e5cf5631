//! `rmb`: runs seeded Monte Carlo batches of the closed sensor-control loop
//! and writes per-trial and aggregate CSV files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use robust_mb::experiment::{run_batch, write_batch, TrialLog};
use robust_mb::filter::FilterMode;
use robust_mb::scenario::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Robust,
    Baseline,
}

#[derive(Debug, Parser)]
#[command(name = "rmb", version, about = "Robust multi-Bernoulli sensor control experiments")]
struct Args {
    /// Scenario and filter configuration (TOML). Built-in defaults if absent.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Monte Carlo runs per mode.
    #[arg(long, value_name = "N", default_value_t = 20)]
    runs: usize,

    /// Base seed; run i uses seed + i.
    #[arg(long, value_name = "S", default_value_t = 1)]
    seed: u64,

    /// Filter mode; repeat for several. Defaults to robust and baseline.
    #[arg(long, value_enum)]
    mode: Vec<Mode>,

    /// Output directory for the CSV files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Rényi order in (0, 1).
    #[arg(long)]
    alpha: Option<f64>,

    /// Monte Carlo sets per reward evaluation.
    #[arg(long, value_name = "L")]
    reward_samples: Option<usize>,

    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,

    /// No per-trial progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

fn load(args: &Args) -> robust_mb::Result<Config> {
    let mut config = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(alpha) = args.alpha {
        config.control.alpha = alpha;
    }
    if let Some(l) = args.reward_samples {
        config.control.reward_samples = l;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &Args) -> robust_mb::Result<()> {
    let config = load(args)?;
    if args.print_config {
        print!("{}", config.to_toml_string());
        return Ok(());
    }
    let mut modes: Vec<FilterMode> = Vec::new();
    let requested = if args.mode.is_empty() {
        vec![Mode::Robust, Mode::Baseline]
    } else {
        args.mode.clone()
    };
    for m in requested {
        let mode = match m {
            Mode::Robust => FilterMode::Robust,
            Mode::Baseline => config.baseline_mode(),
        };
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }

    let quiet = args.quiet;
    let progress = |log: &TrialLog| {
        if !quiet {
            let ms: f64 = log.step_ms.iter().sum();
            eprintln!("{} seed {}: {} steps in {:.1} s", log.mode, log.seed, log.steps.len(), ms / 1e3);
        }
    };
    let batch = run_batch(&config, args.runs, args.seed, &modes, progress)?;
    write_batch(&args.out, &batch)?;
    if !quiet {
        eprintln!("wrote {}", args.out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
