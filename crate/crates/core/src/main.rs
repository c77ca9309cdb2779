use std::path::PathBuf;

use clap::{Parser, Subcommand};
use robust_sysid::cli;

#[derive(Parser)]
#[command(name = "robust-sysid", version, about = "Robust identification of Ā from a single trajectory")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate { config: PathBuf },
    /// Fit the configured estimators to a trajectory CSV.
    Fit { config: PathBuf, trajectory: PathBuf },
    /// Run an error-versus-length sweep and write the report CSV.
    Sweep {
        config: PathBuf,
        /// Fill the wall_time_ms column (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Report the stability condition and, optionally, trajectory excitation.
    Check {
        config: PathBuf,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

fn main() {
    let args = Args::parse();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let code = match args.command {
        Command::Simulate { config } => cli::cmd_simulate(&config, &mut out, &mut err),
        Command::Fit { config, trajectory } => cli::cmd_fit(&config, &trajectory, &mut out, &mut err),
        Command::Sweep { config, timing } => cli::cmd_sweep(&config, timing, &mut out, &mut err),
        Command::Check { config, trajectory } => cli::cmd_check(&config, trajectory.as_deref(), &mut out, &mut err),
    };
    std::process::exit(code);
}
