use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jqc::experiments::{run_cli_command, RunOptions};

/// Batch driver for Jastrow-projected quantum circuit experiments.
#[derive(Parser)]
#[command(name = "jqc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reweight counts with exp(J) instead of exp(2J).
    #[arg(long)]
    literal_weight: bool,
    /// Worker threads for grid rows (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Model-parameter sweep: circuit vs projected energies per depth.
    Sweep(RunArgs),
    /// Computational gain as a function of size and depth.
    Gain(RunArgs),
    /// Exact and sampled energies along a Jastrow rescaling.
    LambdaScan(RunArgs),
    /// Reconstruction bench on random real-valued states.
    Reconstruct(RunArgs),
    /// Energy dispersion under a fixed measurement budget.
    Dispersion(RunArgs),
    /// Write a model Hamiltonian in the text term format.
    DumpH(RunArgs),
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::Sweep(_) => "sweep",
            Command::Gain(_) => "gain",
            Command::LambdaScan(_) => "lambda-scan",
            Command::Reconstruct(_) => "reconstruct",
            Command::Dispersion(_) => "dispersion",
            Command::DumpH(_) => "dump-h",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Sweep(a)
            | Command::Gain(a)
            | Command::LambdaScan(a)
            | Command::Reconstruct(a)
            | Command::Dispersion(a)
            | Command::DumpH(a) => a,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let args = cli.command.args();
    let opts = RunOptions {
        seed_override: args.seed,
        out_override: args.out.clone(),
        literal_weight: args.literal_weight,
        threads: args.threads,
    };
    let config_text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::FAILURE;
        }
    };
    match run_cli_command(cli.command.kind(), &config_text, &opts) {
        Ok(summary) => {
            match &summary.out_path {
                Some(path) => eprintln!(
                    "wrote {} rows to {}",
                    summary.records.len(),
                    path.display()
                ),
                None => {}
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
