use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use saliency_eval::pipeline::{self, Experiment, ExperimentConfig, Overrides, Summary};
use saliency_eval::Result;

/// Evaluate saliency maps and compare the evaluation metrics.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: maps, scores, statistics and plot data.
    Run(Common),
    /// Compute saliency maps into the cache only.
    Explain(Common),
    /// Score metrics on cached (or freshly computed) maps.
    Score(Common),
    /// Statistics on an existing scores.csv.
    Stats(Common),
    /// Plot data from an existing report.json.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Global seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict the metric roster (comma-separated names).
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            output: self.out.clone(),
            jobs: self.jobs,
            only: self.only.clone(),
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Outcome {
    Clean,
    Partial,
}

fn from_summary(s: &Summary) -> Outcome {
    info!(
        "{} images, {} score rows, {} failures, cache {} hits / {} misses",
        s.images, s.rows, s.failures, s.cache_hits, s.cache_misses
    );
    if s.clean() {
        Outcome::Clean
    } else {
        Outcome::Partial
    }
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Run(c) => {
            let exp = Experiment::prepare(c.load()?)?;
            let (report, summary) = pipeline::run(&exp)?;
            info!(
                "{} methods x {} metric instances written to {}",
                report.methods.len(),
                report.columns.len(),
                exp.output().display()
            );
            Ok(from_summary(&summary))
        }
        Command::Explain(c) => {
            let exp = Experiment::prepare(c.load()?)?;
            Ok(from_summary(&pipeline::explain(&exp)?))
        }
        Command::Score(c) => {
            let exp = Experiment::prepare(c.load()?)?;
            let (_, summary) = pipeline::score(&exp)?;
            Ok(from_summary(&summary))
        }
        Command::Stats(c) => {
            let cfg = c.load()?;
            let report = pipeline::stats(&cfg.output, pipeline::stats_settings(&cfg))?;
            Ok(if report.dropped_columns.is_empty() {
                Outcome::Clean
            } else {
                Outcome::Partial
            })
        }
        Command::Report(c) => {
            let cfg = c.load()?;
            pipeline::plot(&cfg.output)?;
            Ok(Outcome::Clean)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            error!("completed with failures; see failures.csv");
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
