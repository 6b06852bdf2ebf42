use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use v2xsim::batch::{format_summary, run_batch, BatchOptions};
use v2xsim::config::parse_config;
use v2xsim::par::Execution;

/// LTE-A RSU downlink simulator for highway V2I scenarios.
///
/// Runs every experiment of a config file (or a filtered subset) and
/// writes one directory of CSV files per experiment plus a combined
/// results_table.csv, then prints the target-probability and cell-edge
/// tables.
#[derive(Debug, Parser)]
#[command(name = "v2xsim", version)]
struct Args {
    /// Config file with scenario/channel/phy/l2s/mac/engine sections and an
    /// experiments list.
    #[arg(long, short)]
    config: PathBuf,

    /// Output directory.
    #[arg(long, short, env = "V2XSIM_OUTPUT", default_value = "output")]
    output_dir: PathBuf,

    /// Master seed; drop d uses seed + d.
    #[arg(long)]
    seed: Option<u64>,

    /// Drops per experiment.
    #[arg(long)]
    drops: Option<usize>,

    /// TTIs (1 ms) per drop.
    #[arg(long)]
    ttis: Option<u64>,

    /// Comma-separated experiment labels to run.
    #[arg(long, value_delimiter = ',')]
    experiments: Option<Vec<String>>,

    /// Worker threads (1 runs sequentially). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> anyhow::Result<bool> {
    let file = parse_config(&args.config)?;
    let options = BatchOptions {
        seed: args.seed,
        drops: args.drops,
        ttis: args.ttis,
        experiments: args.experiments,
        threads: args.threads,
        execution: if args.threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let report = run_batch(&file, &options, &args.output_dir)
        .with_context(|| format!("running {}", args.config.display()))?;
    print!("{}", format_summary(&report.rows()));
    let failures = report.failures();
    for (label, error) in &failures {
        eprintln!("error: {label}: {error}");
    }
    Ok(failures.is_empty())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
