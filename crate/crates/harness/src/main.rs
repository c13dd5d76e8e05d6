use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wpi_harness::{compare_report, run_batch, run_experiment, Experiment, ExperimentConfig, Manifest};

#[derive(Parser)]
#[command(name = "wpi-lab", version, about = "Weak Poincaré and variance-decay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; every key is optional
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default runs/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted key=value, e.g. grid.n=256 (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the growth conditions of a symbol
    ValidateSymbol(RunArgs),
    /// Shell DoS estimates and power-law fit
    DosFit(RunArgs),
    /// Certificate and explicit/implicit bounds for one field
    WpiCheck(RunArgs),
    /// Nash inequality over random and Gaussian fields
    Nash(RunArgs),
    /// Semigroup trace, decay slope and envelope
    DecayRun(RunArgs),
    /// Regime table and envelope asymptotics
    Regimes(RunArgs),
    /// Run several configs concurrently
    Batch {
        configs: Vec<PathBuf>,
        /// Where batch.json goes
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Differences between two run directories
    Compare { run_a: PathBuf, run_b: PathBuf },
}

fn load(experiment: Experiment, args: RunArgs) -> Result<ExperimentConfig, wpi_harness::HarnessError> {
    let mut overrides = args.overrides;
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = args.out {
        overrides.push(format!("out_dir={:?}", out.display().to_string()));
    }
    ExperimentConfig::load(experiment, args.config.as_deref(), &overrides)
}

fn report(m: &Manifest) {
    for c in &m.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for n in &m.notes {
        println!("note: {n}");
    }
}

fn single(experiment: Experiment, args: RunArgs) -> ExitCode {
    let fallback_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(experiment.as_str()));
    let cfg = match load(experiment, args) {
        Ok(c) => c,
        Err(e) => {
            let path = fallback_dir.join(wpi_harness::ERROR_FILE);
            let written = std::fs::create_dir_all(&fallback_dir)
                .and_then(|_| std::fs::write(&path, format!("{experiment} failed: {e}\n")));
            match written {
                Ok(()) => eprintln!("error: {e} (see {})", path.display()),
                Err(_) => eprintln!("error: {e}"),
            }
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg) {
        Ok(m) => {
            report(&m);
            println!("wrote {}", cfg.out_dir().display());
            if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e} (see {})", cfg.out_dir().join(wpi_harness::ERROR_FILE).display());
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::ValidateSymbol(a) => (Experiment::ValidateSymbol, a),
        Command::DosFit(a) => (Experiment::DosFit, a),
        Command::WpiCheck(a) => (Experiment::WpiCheck, a),
        Command::Nash(a) => (Experiment::Nash, a),
        Command::DecayRun(a) => (Experiment::DecayRun, a),
        Command::Regimes(a) => (Experiment::Regimes, a),
        Command::Batch { configs, out } => {
            let mut loaded = Vec::new();
            for p in configs {
                let parsed = std::fs::read_to_string(&p)
                    .map_err(|e| wpi_harness::HarnessError::Config(format!("{}: {e}", p.display())))
                    .and_then(|t| ExperimentConfig::from_toml(&t));
                match parsed {
                    Ok(c) => loaded.push((p, c)),
                    Err(e) => {
                        eprintln!("error: {}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
            }
            return match run_batch(&loaded, &out) {
                Ok(entries) => {
                    for e in &entries {
                        let status = match (&e.error, e.passed) {
                            (Some(err), _) => format!("ERROR {err}"),
                            (None, true) => "PASS".into(),
                            (None, false) => "FAIL".into(),
                        };
                        println!("{status} {} -> {}", e.config.display(), e.out_dir.display());
                    }
                    if entries.iter().all(|e| e.passed) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
        Command::Compare { run_a, run_b } => {
            return match compare_report(&run_a, &run_b) {
                Ok(d) => {
                    print!("{d}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    single(experiment, args)
}
