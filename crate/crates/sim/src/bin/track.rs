use std::path::PathBuf;
use std::process::ExitCode;

use almb_sim::output::{plotdata, write_outputs, RUNS_FILE};
use almb_sim::{monte_carlo, FilterKind, Result, RunOptions, ScenarioConfig};
use clap::{Parser, Subcommand};

/// Monte-Carlo evaluation of the LMB, δ-GLMB and adaptive LMB trackers.
#[derive(Parser)]
#[command(name = "track", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write per-step results to DIR/runs.csv and DIR/aggregate.csv.
    Run {
        /// Scenario file, or builtin:two-target / builtin:sixteen-target.
        #[arg(long)]
        scenario: String,
        /// lmb, dglmb, almb or all.
        #[arg(long, default_value = "all")]
        filter: String,
        #[arg(long, default_value_t = 1)]
        runs: u32,
        /// Base seed; run r uses seed + r. Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's clutter rate.
        #[arg(long)]
        clutter: Option<f64>,
        /// Record wall-clock step times (otherwise written as 0).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a run directory into per-figure tables (ospat.csv, runtime.csv, cardinality.csv).
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn filters(spec: &str) -> Result<Vec<FilterKind>> {
    if spec == "all" {
        return Ok(FilterKind::ALL.to_vec());
    }
    spec.split(',').map(str::parse).collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            filter,
            runs,
            seed,
            clutter,
            timing,
            out,
        } => {
            let mut config = ScenarioConfig::load(&scenario)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(rate) = clutter {
                config.sensor.clutter_rate = rate;
            }
            config.validate()?;
            let kinds = filters(&filter)?;
            let records = monte_carlo(&config, runs, &kinds, RunOptions { timing }, |r| {
                eprintln!("run {}/{} done", r + 1, runs);
            })?;
            write_outputs(&out, &records)?;
            eprintln!("wrote {}", out.join(RUNS_FILE).display());
        }
        Command::Plotdata { input, out } => {
            for name in plotdata(&input, &out)? {
                eprintln!("wrote {}", out.join(name).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
