use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarmctl::cli::{self, Command, RunArgs, EXIT_CONFIG};
use swarmctl::dynamics::Order;

/// Optimal consensus control of swarms on the unit sphere.
#[derive(Parser)]
#[command(name = "swarmctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the uncontrolled dynamics.
    Simulate(Common),
    /// Minimize the consensus cost by Barzilai-Borwein descent.
    Optimize(Common),
    /// Optimize, then write controlled and uncontrolled runs side by side.
    Compare(Common),
    /// Compare the adjoint gradient with central differences.
    Gradcheck(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the model order.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: Option<u8>,
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let (cmd, common) = match parsed.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Optimize(c) => (Command::Optimize, c),
        Sub::Compare(c) => (Command::Compare, c),
        Sub::Gradcheck(c) => (Command::Gradcheck, c),
    };
    let args = RunArgs {
        config: common.config,
        out: common.out,
        seed: common.seed,
        order: common.order.and_then(Order::from_u8),
    };
    let outcome = cli::run(cmd, &args);
    if outcome.code == 0 {
        println!("{}: {}", cmd.as_str(), outcome.message);
    } else {
        eprintln!("swarmctl {}: {}", cmd.as_str(), outcome.message);
    }
    ExitCode::from(outcome.code as u8)
}
