//! `rmaccess`: Monte Carlo sweeps, decoder timing and the acceptance checks.
//!
//! Thread count follows `RAYON_NUM_THREADS`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rmaccess::sim::{run_sweep, scaling_bench, summary_table, BenchConfig, ExperimentSpec};
use rmaccess::verify::{run_criterion, CRITERIA};

#[derive(Parser)]
#[command(name = "rmaccess", version, about = "Unsourced random access simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a TOML spec file.
    Run {
        spec: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override trials per point.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory; defaults to the spec's `output`, then `results`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the per-slot detector over the m and r grids.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [8, 9, 10, 11])]
        m: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 4, 16])]
        r: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        reps: usize,
    },
    /// Run the acceptance criteria; exits nonzero if any fails.
    Verify {
        /// Criterion numbers to run (default: all).
        #[arg(value_parser = clap::value_parser!(u8).range(1..=9))]
        only: Vec<u8>,
    },
}

fn run(spec_path: PathBuf, seed: Option<u64>, trials: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let mut spec = ExperimentSpec::load(&spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(trials) = trials {
        spec.trials = trials;
    }
    spec.validate()?;
    let out_dir = out
        .or_else(|| spec.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let outcome = run_sweep(&spec, &out_dir).with_context(|| format!("sweep {}", spec_path.display()))?;
    print!("{}", summary_table(&outcome.summaries));
    eprintln!(
        "{} point(s) computed, {} resumed; trials in {}, summary in {}",
        outcome.computed,
        outcome.skipped,
        outcome.trials_path.display(),
        outcome.summary_path.display()
    );
    Ok(())
}

fn verify(only: Vec<u8>) -> Result<bool> {
    let ids: Vec<usize> = if only.is_empty() {
        (1..=CRITERIA.len()).collect()
    } else {
        only.into_iter().map(usize::from).collect()
    };
    let mut all = true;
    for id in ids {
        let report = run_criterion(id)?;
        all &= report.passed;
        println!("{report}");
    }
    Ok(all)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { spec, seed, trials, out } => run(spec, seed, trials, out)?,
        Command::Bench { m, r, reps } => {
            let cfg = BenchConfig {
                m_values: m,
                r_values: r,
                reps,
                ..BenchConfig::default()
            };
            print!("{}", scaling_bench(&cfg)?.table());
        }
        Command::Verify { only } => {
            if !verify(only)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
