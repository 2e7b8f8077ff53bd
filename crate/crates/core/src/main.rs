use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blindpath::cli::{cmd_estimate, cmd_sweep, cmd_synthesize, CommonArgs};

#[derive(Parser)]
#[command(name = "blindpath", version, about = "Blind multipath parameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<Common> for CommonArgs {
    fn from(c: Common) -> Self {
        CommonArgs {
            config: c.config,
            out: c.out,
            seed: c.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo RMSE sweep over the configured SNR grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write only the CSV and manifest.
        #[arg(long)]
        no_plots: bool,
    },
    /// Estimate paths from an observation file.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Observation file written by `synthesize`.
        #[arg(long)]
        observation: PathBuf,
    },
    /// Write an observation file and its ground-truth sidecar.
    Synthesize {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Sweep { common, jobs, no_plots } => cmd_sweep(&common.into(), jobs, !no_plots).map(|m| {
            m.outputs.iter().for_each(|p| println!("{}", p.display()));
        }),
        Command::Estimate { common, observation } => cmd_estimate(&common.into(), &observation).map(|o| {
            for e in &o.estimates {
                println!("{}: cost {:.6e}, {} iterations", e.estimator, e.cost, e.iterations);
            }
        }),
        Command::Synthesize { common } => cmd_synthesize(&common.into()).map(|m| {
            m.outputs.iter().for_each(|p| println!("{}", p.display()));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
