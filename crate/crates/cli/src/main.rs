use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use yamabe_cli::config::{self, ConfigError, Experiment};
use yamabe_cli::{run, RunError};

#[derive(Parser)]
#[command(
    name = "yamabe",
    version,
    about = "Boundary Yamabe numerical laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path prefix; overrides the config.
    #[arg(long)]
    out: Option<String>,
    /// Random seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the Yamabe constant by constrained minimization.
    Minimize(RunArgs),
    /// Hessian spectrum and kernel at the minimizer.
    Spectrum(RunArgs),
    /// Reduced energy on the kernel chart.
    Lsred(RunArgs),
    /// Deficit against distance and the stability exponent fit.
    Stability(RunArgs),
    /// Compare the quotient under conformal changes.
    Covariance(RunArgs),
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn config_exit(e: ConfigError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Validate { config } => {
            let value = match config::read_value(&config) {
                Ok(v) => v,
                Err(e) => return config_exit(e),
            };
            let diags = config::validate_value(&value);
            if diags.is_empty() {
                println!("{}: ok", config.display());
                return ExitCode::SUCCESS;
            }
            for d in &diags {
                println!("{d}");
            }
            return ExitCode::from(2);
        }
        Command::Minimize(a) => (Experiment::Minimize, a),
        Command::Spectrum(a) => (Experiment::Spectrum, a),
        Command::Lsred(a) => (Experiment::Lsred, a),
        Command::Stability(a) => (Experiment::Stability, a),
        Command::Covariance(a) => (Experiment::Covariance, a),
    };
    let mut cfg = match config::load(&args.config) {
        Ok(c) => c,
        Err(e) => return config_exit(e),
    };
    if cfg.experiment != experiment {
        eprintln!(
            "configuration error: subcommand {} does not match experiment \"{}\" in {}",
            experiment.name(),
            cfg.experiment.name(),
            args.config.display()
        );
        return ExitCode::from(2);
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(RunError::exit_code(&e) as u8)
        }
    }
}
