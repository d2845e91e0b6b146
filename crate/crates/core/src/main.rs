// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end.
//!
//! ```text
//! alpha-games <subcommand> --config <file> [--seed S] [--paths P] [--steps M]
//!                          [--players N] [--out DIR]
//!
//! exit 0  every acceptance check of the run passed
//! exit 1  an acceptance check failed, or the run itself failed
//! exit 2  the configuration is invalid or over budget
//! ```

use alpha_games::app::config::{ExperimentConfig, Overrides};
use alpha_games::app::run::{run, Command};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "alpha-games",
    version,
    about = "Alpha-potential diagnostics for stochastic differential games"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate the state and report costs and moments.
    Simulate(Common),
    /// First and second cost derivatives.
    Deriv(Common),
    /// Three-way agreement of finite differences, sensitivities and BSDEs.
    CrossCheck(Common),
    /// Empirical asymmetry matrix and the alpha bound.
    Alpha(Common),
    /// Constant ledger, pair bounds and moment constants.
    Bound(Common),
    /// Decay of alpha with the number of players.
    Scaling(Common),
    /// Potential function and deviation gaps.
    Potential(Common),
    /// Exploitability of the potential minimizer.
    NashGap(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Number of time steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Number of players.
    #[arg(long)]
    players: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Simulate(c) => (Command::Simulate, c),
            Sub::Deriv(c) => (Command::Deriv, c),
            Sub::CrossCheck(c) => (Command::CrossCheck, c),
            Sub::Alpha(c) => (Command::Alpha, c),
            Sub::Bound(c) => (Command::Bound, c),
            Sub::Scaling(c) => (Command::Scaling, c),
            Sub::Potential(c) => (Command::Potential, c),
            Sub::NashGap(c) => (Command::NashGap, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, args) = cli.command.split();
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        paths: args.paths,
        steps: args.steps,
        players: args.players,
        out: args.out,
    });
    if let Err(e) = cfg.validate(cmd.cost_factor(&cfg)) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let report = match run(cmd, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = report.write(&cfg.out) {
        eprintln!("error: cannot write the report to {}: {e}", cfg.out.display());
        return ExitCode::from(1);
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("report written to {}", cfg.out.join("report.json").display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
