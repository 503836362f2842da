//! Experiment orchestration: config, ingestion, map cache, scoring and
//! report emission.
//!
//! Output directory layout:
//!
//! | file | stage |
//! |---|---|
//! | `cache/<method>/<image_id>.smap` | explain |
//! | `scores.csv`, `failures.csv` | score |
//! | `matrix.csv`, `tau_*.csv`, `pvals_*.csv`, `holm_mask_*.csv`, `holm_family_mask_*.csv`, `ranks_*.csv`, `report.json` | stats |
//! | `plot_data.json` | report |

pub mod cache;
pub mod config;
pub mod dataset;
pub mod report;
pub mod run;
pub mod scores;

use std::path::Path;

use log::info;

pub use cache::MapCache;
pub use config::{ExperimentConfig, Overrides};
pub use report::{compute_report, plot_data, PlotData, Report, StatsSettings};
pub use run::{Experiment, Failure, Method, MethodSource};
pub use scores::{ScoreRow, ScoresTable};

use crate::error::Result;
use crate::seed::{derive, label};

pub const SCORES_FILE: &str = "scores.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub images: usize,
    pub rows: usize,
    /// Per-item failures, including undecodable input files.
    pub failures: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

impl Summary {
    pub fn clean(&self) -> bool {
        self.failures == 0
    }
}

pub fn stats_settings(cfg: &ExperimentConfig) -> StatsSettings {
    StatsSettings {
        alpha: cfg.stats.alpha,
        trials: cfg.stats.trials,
        seed: derive(cfg.seed, label("stats")),
    }
}

/// Computes or loads every saliency map into the cache.
pub fn explain(exp: &Experiment) -> Result<Summary> {
    std::fs::create_dir_all(exp.output())?;
    let cache = MapCache::new(exp.output());
    let failures = exp.explain_all(&cache)?;
    run::write_failures(&exp.output().join(FAILURES_FILE), &exp.ingest_failures, &failures)?;
    Ok(Summary {
        images: exp.samples.len(),
        rows: 0,
        failures: failures.len() + exp.ingest_failures.len(),
        cache_hits: cache.hits(),
        cache_misses: cache.misses(),
    })
}

/// Scores every metric instance and writes `scores.csv`.
pub fn score(exp: &Experiment) -> Result<(ScoresTable, Summary)> {
    std::fs::create_dir_all(exp.output())?;
    let cache = MapCache::new(exp.output());
    let (table, failures) = exp.score_all(&cache)?;
    table.write_csv(&exp.output().join(SCORES_FILE))?;
    run::write_failures(&exp.output().join(FAILURES_FILE), &exp.ingest_failures, &failures)?;
    info!("{} score rows, {} failures", table.len(), failures.len());
    let summary = Summary {
        images: exp.samples.len(),
        rows: table.len(),
        failures: failures.len() + exp.ingest_failures.len(),
        cache_hits: cache.hits(),
        cache_misses: cache.misses(),
    };
    Ok((table, summary))
}

/// Statistics over an existing `scores.csv` in `dir`.
pub fn stats(dir: &Path, settings: StatsSettings) -> Result<Report> {
    let table = ScoresTable::read_csv(&dir.join(SCORES_FILE))?;
    let report = compute_report(&table, settings)?;
    report::write_report(dir, &report)?;
    Ok(report)
}

/// Plot data from an existing `report.json` in `dir`.
pub fn plot(dir: &Path) -> Result<PlotData> {
    let report = report::read_report(&dir.join(REPORT_FILE))?;
    report::write_plot_data(dir, &report)?;
    Ok(plot_data(&report))
}

/// All stages in order.
pub fn run(exp: &Experiment) -> Result<(Report, Summary)> {
    let (table, summary) = score(exp)?;
    let report = compute_report(&table, stats_settings(&exp.config))?;
    report::write_report(exp.output(), &report)?;
    report::write_plot_data(exp.output(), &report)?;
    Ok((report, summary))
}
