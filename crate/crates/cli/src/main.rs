//! `cbounds`: runs coefficient, envelope, verification and application
//! experiments from a TOML config and writes CSV tables plus `summary.json`.
//!
//! Exit status: 0 when every verdict passes, 1 when one fails, 2 on errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use contraction_bounds::par::Exec;

use config::Config;
use output::{write_summary, Report};

#[derive(Parser, Debug)]
#[command(name = "cbounds", version, about = "Deviation bounds for contractive Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config. `selftest` runs without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `master_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run replications on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// K_{k,n} table and the asymptotics report.
    Coeffs,
    /// Envelope values on a threshold grid.
    Bound,
    /// Empirical or exact tail against the selected envelopes.
    Verify,
    /// Moment bounds against Monte-Carlo estimates.
    Moments,
    /// Averaged stochastic approximation experiment.
    Sa,
    /// Grid ERM excess-risk experiment.
    Erm,
    /// One trajectory of the configured chain.
    Simulate,
    /// The full acceptance suite.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Bound => "bound",
            Command::Verify => "verify",
            Command::Moments => "moments",
            Command::Sa => "sa",
            Command::Erm => "erm",
            Command::Simulate => "simulate",
            Command::Selftest => "selftest",
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None if cli.command == Command::Selftest => Config::default(),
        None => anyhow::bail!("{} needs --config", cli.command.name()),
    };
    if let Some(k) = cli.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("starting the worker pool")?;
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let master = cli.seed.unwrap_or(cfg.master_seed);
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let name = cli.command.name();
    let seed = commands::sub_seed(master, name);
    let out = cli.out.as_path();
    let mut report = Report::default();
    match cli.command {
        Command::Coeffs => commands::coeffs(&cfg, out, &mut report)?,
        Command::Bound => commands::bound(&cfg, out, &mut report)?,
        Command::Verify => commands::verify(&cfg, out, seed, exec, &mut report)?,
        Command::Moments => commands::moments(&cfg, out, seed, exec, &mut report)?,
        Command::Sa => commands::sa(&cfg, out, seed, exec, &mut report)?,
        Command::Erm => commands::erm(&cfg, out, seed, exec, &mut report)?,
        Command::Simulate => commands::simulate_cmd(&cfg, out, seed, &mut report)?,
        // The acceptance suite uses the master seed directly.
        Command::Selftest => commands::selftest(master, exec, out, &mut report)?,
    }
    let path = write_summary(out, name, master, &report, start.elapsed().as_secs_f64())?;
    for v in &report.verdicts {
        if cli.command != Command::Selftest {
            println!("[{}] {}: {}", v.verdict, v.name, v.detail);
        }
    }
    for s in &report.skipped {
        println!("[SKIP] {}: {}", s.name, s.reason);
    }
    println!("wrote {} and {}", report.outputs.join(", "), path.display());
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
