//! Batch experiment runner.
//!
//! `czwave run <config> [--out DIR] [--threads N] [--seed S]` parses the
//! config, executes the named experiment, writes `report.json` and data
//! CSVs into the output directory, and prints one PASS/FAIL line per check.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 on
//! configuration errors (unreadable or invalid config, parameter-range
//! violations).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use czwave::config::parse_config;
use czwave::experiments::run_experiment;

#[derive(Parser)]
#[command(name = "czwave", about = "Numerical laboratory for bilinear singular-integral analysis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Output directory (overrides the config's `out` key; default
        /// `czwave-out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker pool size (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
        /// Seed override (overrides the config's `seed` key).
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => run(config, out, threads, seed),
    }
}

fn run(
    config_path: PathBuf,
    out: Option<PathBuf>,
    threads: Option<usize>,
    seed: Option<u64>,
) -> ExitCode {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("czwave: could not size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let text = match fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("czwave: cannot read {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("czwave: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = out
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("czwave-out"));
    let outcome = match run_experiment(&cfg, &out_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("czwave: {e}");
            return ExitCode::from(2);
        }
    };
    for check in &outcome.checks {
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {}", check.name, check.detail);
    }
    println!(
        "report written to {}",
        out_dir.join("report.json").display()
    );
    if outcome.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
