use std::io::{self, Write};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use rank_verify_cli::commands::{
    cmd_clb, cmd_hsd, cmd_simulate, cmd_verify, ClbArgs, HsdArgs, SimulateArgs, VerifyArgs,
};
use rank_verify_cli::CliError;

/// Selective verification of top-k rankings under a known Gaussian
/// covariance.
#[derive(Parser)]
#[command(name = "rank-verify", version, propagate_version = true)]
struct Cli {
    /// Worker threads for the Monte Carlo commands.
    #[arg(
        long,
        global = true,
        env = "RANK_VERIFY_THREADS",
        default_value_t = 1
    )]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether the observed top k verifiably has the top-k means.
    Verify(VerifyArgs),
    /// Confidence lower bound on the boundary mean gap.
    Clb(ClbArgs),
    /// Conditional Monte Carlo estimates on a scenario.
    Simulate(SimulateArgs),
    /// Simultaneous pairwise baseline with a Monte Carlo quantile.
    Hsd(HsdArgs),
}

/// Writes a line to stdout, exiting quietly if the reader has gone away.
fn emit(text: &str, code: i32) -> ! {
    let mut out = io::stdout();
    if let Err(e) = writeln!(out, "{text}").and_then(|()| out.flush()) {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("stdout write failed: {e}");
            std::process::exit(2);
        }
    }
    std::process::exit(code);
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            emit(e.to_string().trim_end_matches('\n'), 0);
        }
        Err(e) => {
            let err = CliError::Usage {
                message: e.to_string(),
            };
            eprintln!("{}", err.to_json());
            std::process::exit(err.exit_code());
        }
    };
    let result = match &cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Clb(args) => cmd_clb(args),
        Command::Simulate(args) => cmd_simulate(args, cli.threads),
        Command::Hsd(args) => cmd_hsd(args, cli.threads),
    };
    match result {
        Ok(out) => emit(out.stdout.trim_end_matches('\n'), out.exit_code),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
