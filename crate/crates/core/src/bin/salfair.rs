use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use saliency_fairness::attribution::AttributionMethod;
use saliency_fairness::data::SyntheticSpec;
use saliency_fairness::experiment::{self, ExperimentConfig};
use saliency_fairness::metrics::DEFAULT_ALPHA;
use saliency_fairness::{io, Error, Result};

/// Saliency-map and fairness metrics for debiasing experiments.
///
/// Exit codes: 0 success, 1 invalid input, 2 failed computation.
#[derive(Parser)]
#[command(name = "salfair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare vanilla and debiased maps with matching file names.
    Metrics {
        #[arg(long)]
        vanilla: PathBuf,
        #[arg(long)]
        debiased: PathBuf,
        #[arg(long)]
        roi: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-metric CSVs from a completed run directory.
    Plotdata {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from a recipe (defaults when omitted).
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Undersample a dataset directory to a target phi.
    Rebalance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attribute every image of a dataset under a checkpoint.
    Attribute {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "IG")]
        method: AttributionMethod,
        #[arg(long, default_value_t = 1)]
        class: u8,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Metrics {
            vanilla,
            debiased,
            roi,
            alpha,
            out,
        } => {
            let report = experiment::cmd_metrics(vanilla, debiased, roi, &out, alpha)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::read(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let summary = experiment::cmd_run(&cfg, &out)?;
            println!("{} reports written to {}", summary.reports.len(), out.display());
        }
        Command::Plotdata { run, out } => {
            for path in experiment::cmd_plotdata(run, out)? {
                println!("{}", path.display());
            }
        }
        Command::Generate { config, seed, out } => {
            let mut spec = match config {
                Some(path) => io::read_json::<SyntheticSpec>(&path)
                    .map_err(|e| Error::Config(e.to_string()))?,
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            spec.validate()?;
            let samples = experiment::cmd_generate(&spec, &out)?;
            println!("{} samples written to {}", samples.len(), out.display());
        }
        Command::Rebalance { input, phi, seed, out } => {
            let subset = experiment::cmd_rebalance(input, phi, seed, &out)?;
            println!("{} samples written to {}", subset.len(), out.display());
        }
        Command::Attribute {
            checkpoint,
            dataset,
            method,
            class,
            out,
        } => {
            let table = experiment::cmd_attribute(checkpoint, dataset, method, class, &out)?;
            println!("{} maps written to {}", table.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
