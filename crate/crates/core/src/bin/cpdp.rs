use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpdp_bilevel::experiment::{compare_dirs, run, synth_to_dir, ExperimentError, RunConfig};
use cpdp_bilevel::metrics::MetricId;

#[derive(Parser)]
#[command(name = "cpdp", version, about = "Bilevel pipeline search for cross-project defect prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the search described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Run repeats concurrently.
        #[arg(long)]
        parallel_repeats: bool,
    },
    /// Compare result directories, one method per directory.
    Compare {
        #[arg(long, default_value = "auc")]
        metric: MetricId,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true, num_args = 1..)]
        dirs: Vec<PathBuf>,
    },
    /// Write a synthetic benchmark as CSV files.
    Synth {
        #[arg(long, default_value_t = 5)]
        projects: usize,
        #[arg(long, default_value_t = 500)]
        rows: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 2.0)]
        shift: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config, seed, out, parallel_repeats } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            for o in run(&cfg, &out, parallel_repeats)? {
                let best = o.result.selected();
                println!(
                    "seed {}: {} archive members, best {} (test auc {:.4}), {:.1}s -> {}",
                    o.result.metadata.seed,
                    o.result.archive.len(),
                    best.map_or("-", |b| b.pipeline_id.as_str()),
                    best.map_or(f64::NAN, |b| b.metrics.auc),
                    o.timing.wall_seconds,
                    o.result_path.display()
                );
            }
        }
        Command::Compare { metric, alpha, out, dirs } => {
            let text = compare_dirs(&dirs, metric, alpha)?.render();
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, text).map_err(|e| ExperimentError::Io { path: path.display().to_string(), source: e })?;
            }
        }
        Command::Synth { projects, rows, features, shift, seed, out } => {
            for p in synth_to_dir(projects, rows, features, shift, seed, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
