//! `sigdetect`: signal-detection tests, separation rates, lower-bound
//! diagnostics, and Monte Carlo verification for the heteroscedastic
//! Gaussian sequence model, driven by JSON configs.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sigdetect", version, about)]
struct Cli {
    /// Worker threads for Monte Carlo loops (0 = all cores). Results are
    /// byte-identical for any worker count.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Write primary output (JSON or CSV depending on the command) to a file
    /// instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Write the JSON summary of verify/separation/scaling runs to a file.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Null quantile of a test statistic (JSON: value, method, reps, seed).
    Quantile {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one test on a data file of Y values (CSV, one value per line).
    Test {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Closed-form rate table (CSV: name, side, value, args).
    Rates {
        #[arg(long)]
        config: PathBuf,
    },
    /// Divergence report for a least-favorable prior (JSON).
    LowerBound {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tail-bound verification table (CSV).
    Concentration {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical level of a test under the null (CSV + JSON summary).
    VerifyLevel {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical power against a fixed signal or a prior (CSV + JSON summary).
    VerifyPower {
        #[arg(long)]
        config: PathBuf,
    },
    /// Bisection estimate of the empirical separation radius (CSV + JSON).
    Separation {
        #[arg(long)]
        config: PathBuf,
    },
    /// Log-log scaling of separation radii across a sigma grid (CSV + JSON).
    Scaling {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .expect("rayon pool is configured once");
    }
    match run(&cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns false when an acceptance-style check failed (nonzero exit).
fn run(cli: &Cli) -> Result<bool> {
    let sink = output::Sink::new(cli.out.as_deref(), cli.summary.as_deref());
    match &cli.command {
        Command::Quantile { config } => commands::quantile(config, &sink),
        Command::Test { config, data } => commands::test(config, data, &sink),
        Command::Rates { config } => commands::rates(config, &sink),
        Command::LowerBound { config } => commands::lower_bound(config, &sink),
        Command::Concentration { config } => commands::concentration(config, &sink),
        Command::VerifyLevel { config } => commands::verify_level(config, &sink),
        Command::VerifyPower { config } => commands::verify_power(config, &sink),
        Command::Separation { config } => commands::separation(config, &sink),
        Command::Scaling { config } => commands::scaling(config, &sink),
    }
}
