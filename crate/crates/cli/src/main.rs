//! `vape` — seeded dynamic-pricing experiments from the command line.
//!
//! ```text
//! vape run --algo vape_linear --env configs/stochastic.json \
//!          --horizons 2000,8000,32000 --reps 15 --seed 7 \
//!          --out results.csv [--curve-out curve.csv] [--parallel 4]
//! vape analyze --in results.csv
//! vape selftest
//! ```

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::str::FromStr;
use vape_core::harness::{
    emit_csv, emit_curve_csv, fit_loglog_slope, mean_regret_by_horizon, parse_csv, run_experiment,
    Algorithm, ExperimentSpec,
};
use vape_core::selftest;

#[derive(Parser)]
#[command(
    name = "vape",
    version,
    about = "Contextual dynamic-pricing experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over a horizon grid with seeded repetitions.
    Run {
        /// Algorithm: vape_linear, vape_nonparam or etc.
        #[arg(long)]
        algo: String,
        /// Path to the JSON environment config.
        #[arg(long)]
        env: PathBuf,
        /// Comma-separated horizons, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<u64>,
        /// Repetitions per horizon.
        #[arg(long, default_value_t = 1)]
        reps: u64,
        /// Experiment base seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (per-run records).
        #[arg(long)]
        out: PathBuf,
        /// Optional per-horizon aggregate CSV.
        #[arg(long)]
        curve_out: Option<PathBuf>,
        /// Worker pool width; overrides VAPE_PARALLEL. Defaults to 1.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Fit the log-log slope of a results CSV and print per-horizon means.
    Analyze {
        /// Input CSV produced by `run`.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Execute the built-in statistical checks and report pass/fail.
    Selftest {
        /// Seed of the check simulations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parallel_width(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("VAPE_PARALLEL")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            algo,
            env,
            horizons,
            reps,
            seed,
            out,
            curve_out,
            parallel,
        } => {
            let algorithm = Algorithm::from_str(&algo).map_err(|e| anyhow::anyhow!(e))?;
            let spec = ExperimentSpec {
                algorithm,
                env_config: env,
                horizons,
                repetitions: reps,
                base_seed: seed,
                output_path: out.clone(),
                parallel: parallel_width(parallel),
            };
            let records = run_experiment(&spec).context("experiment failed")?;
            emit_csv(&records, &out)?;
            println!("wrote {} records to {}", records.len(), out.display());
            if let Some(curve) = curve_out {
                emit_curve_csv(&records, &curve)?;
                println!("wrote curve aggregates to {}", curve.display());
            }
            Ok(())
        }
        Command::Analyze { input } => {
            let records = parse_csv(&input)?;
            if records.is_empty() {
                bail!("{}: no records", input.display());
            }
            let means = mean_regret_by_horizon(&records);
            println!("T,mean_regret,runs");
            for &(t, mean) in &means {
                let n = records.iter().filter(|r| r.horizon == t).count();
                println!("{t},{mean:.6},{n}");
            }
            if means.len() >= 2 {
                let (slope, intercept) = fit_loglog_slope(
                    &means
                        .iter()
                        .map(|&(t, m)| (t as f64, m))
                        .collect::<Vec<_>>(),
                )?;
                println!("loglog_slope,{slope:.6}");
                println!("loglog_intercept,{intercept:.6}");
            } else {
                println!("loglog_slope,n/a (one horizon)");
            }
            Ok(())
        }
        Command::Selftest { seed } => {
            let results = selftest::run_all(seed);
            let mut ok = true;
            for r in &results {
                println!(
                    "{:<22} {}  {}",
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.detail
                );
                ok &= r.passed;
            }
            if !ok {
                bail!("selftest failed");
            }
            Ok(())
        }
    }
}
