mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

/// Online learning of weights and delays in spiking networks.
#[derive(Debug, Parser)]
#[command(name = "snn-delay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus `key=value` overrides.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Flat key=value config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set lr_d=0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network and write metrics, checkpoint and resolved config.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test manifest.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compare online gradients with reverse-mode and finite-difference oracles.
    Gradcheck {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Sequence length of the random inputs.
        #[arg(long, default_value_t = 25)]
        steps: usize,
        /// Number of random problems.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Replace the eligibility decay with zero (the check must then fail).
        #[arg(long, hide = true)]
        corrupt_eligibility: bool,
    },
    /// Run an ablation grid and write per-run and summary CSVs.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// sparsity_sweep, fixed_vs_learnable, delay_placement or weights_only_width.
        #[arg(long)]
        protocol: String,
        /// Connection densities for sparsity_sweep.
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
        /// Delay modes for sparsity_sweep.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<String>>,
        /// Hidden widths for weights_only_width.
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
    },
    /// Write the two-channel coincidence dataset and a matching config.
    Synth {
        #[arg(long, short)]
        out: PathBuf,
        /// Samples per class in each split.
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 5)]
        gap: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Summarize a checkpoint: parameter statistics, delays and memory footprint.
    Inspect {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 8)]
        weight_bits: u32,
        #[arg(long, default_value_t = 5)]
        delay_bits: u32,
        #[arg(long, default_value_t = 16)]
        state_bits: u32,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, out, resume } => commands::train(&config, &out, resume.as_deref()),
        Command::Eval { config, checkpoint, out } => commands::eval(&config, &checkpoint, &out),
        Command::Gradcheck { config, out, steps, seeds, h, corrupt_eligibility } => {
            commands::gradcheck(&config, &out, steps, seeds, h, corrupt_eligibility)
        }
        Command::Ablate { config, out, protocol, densities, modes, widths } => {
            commands::ablate(&config, &out, &protocol, densities, modes, widths)
        }
        Command::Synth { out, pairs, gap, frames, seed } => commands::synth(&out, pairs, gap, frames, seed),
        Command::Inspect { checkpoint, weight_bits, delay_bits, state_bits } => {
            commands::inspect(&checkpoint, weight_bits, delay_bits, state_bits)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
