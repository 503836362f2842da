//! Statistics over a scores table: score matrix, Kendall correlation
//! groups, rank tables, `report.json` and the plot-data export.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::scores::{MetricInstance, ScoresTable};
use crate::error::{Error, Result};
use crate::metrics::{MetricFamily, Metric};
use crate::stats::{
    build_score_matrix, correlate_metrics, rank_methods, CorrelationReport, CorrelationSettings, Direction,
    Family, PerImageScores, RankTable, ScoreMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSettings {
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
}

/// A column left out of the matrix, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub settings: StatsSettings,
    pub methods: Vec<String>,
    pub images: Vec<String>,
    /// Metric instances in matrix column order, with direction metadata.
    pub columns: Vec<MetricInstance>,
    pub matrix: ScoreMatrix,
    pub dropped_columns: Vec<Dropped>,
    pub correlations: Vec<CorrelationReport>,
    pub ranks: Vec<RankTable>,
    /// Analyses that could not run (too few methods, no rankable image).
    pub notes: Vec<String>,
}

/// Heatmap series: one per correlation group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub group: String,
    pub columns: Vec<String>,
    pub tau: Vec<Vec<Option<f64>>>,
    /// Holm over all pairs of the group.
    pub significant: Vec<Vec<bool>>,
    /// Holm within each metric family.
    pub family_significant: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpEntry {
    pub method: String,
    pub average_rank: f64,
}

/// Rank-bump series: every method once per metric instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBump {
    pub column: String,
    pub direction: Direction,
    pub ranks: Vec<BumpEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub heatmaps: Vec<Heatmap>,
    pub rank_bump: Vec<RankBump>,
}

fn restrict(scores: &PerImageScores, keep: &[usize]) -> PerImageScores {
    PerImageScores {
        methods: scores.methods.clone(),
        columns: keep.iter().map(|&j| scores.columns[j].clone()).collect(),
        images: scores.images.clone(),
        values: scores
            .values
            .iter()
            .map(|m| keep.iter().map(|&j| m[j].clone()).collect())
            .collect(),
    }
}

/// Correlation groups over the matrix columns: everything (with one Holm
/// family per metric family), each faithfulness metric across baselines,
/// and each baseline across faithfulness metrics.
fn groups(columns: &[MetricInstance]) -> Vec<(String, Vec<usize>, Vec<Family>)> {
    let mut out = Vec::new();
    let all: Vec<usize> = (0..columns.len()).collect();
    let families = MetricFamily::ALL
        .iter()
        .filter_map(|f| {
            let members: Vec<usize> = all.iter().copied().filter(|&j| columns[j].family == *f).collect();
            (!members.is_empty()).then(|| Family {
                name: f.name().to_owned(),
                members,
            })
        })
        .collect();
    out.push(("all".to_owned(), all, families));

    let one = |name: &str, n: usize| {
        vec![Family {
            name: name.to_owned(),
            members: (0..n).collect(),
        }]
    };
    for metric in Metric::ALL.iter().filter(|m| m.uses_baseline()) {
        let sel: Vec<usize> = (0..columns.len()).filter(|&j| columns[j].metric == *metric).collect();
        if sel.len() >= 2 {
            let n = sel.len();
            out.push((format!("baselines_{}", metric.name()), sel, one("baselines", n)));
        }
    }
    let mut baselines: Vec<&str> = Vec::new();
    for c in columns {
        if let Some(b) = c.baseline.as_deref() {
            if !baselines.contains(&b) {
                baselines.push(b);
            }
        }
    }
    for b in baselines {
        let sel: Vec<usize> = (0..columns.len())
            .filter(|&j| columns[j].baseline.as_deref() == Some(b))
            .collect();
        if sel.len() >= 2 {
            let n = sel.len();
            out.push((format!("faithfulness_{b}"), sel, one("faithfulness", n)));
        }
    }
    out
}

/// Matrix, correlations and ranks for a scores table.
pub fn compute_report(table: &ScoresTable, settings: StatsSettings) -> Result<Report> {
    if table.is_empty() {
        return Err(Error::Aggregation("scores table is empty".into()));
    }
    let scores = table.per_image();
    let instances = table.instances();

    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (j, inst) in instances.iter().enumerate() {
        let empty: Vec<&String> = scores
            .methods
            .iter()
            .enumerate()
            .filter(|(i, _)| scores.values[*i][j].iter().all(Option::is_none))
            .map(|(_, m)| m)
            .collect();
        if empty.is_empty() {
            keep.push(j);
        } else {
            let reason = format!(
                "no defined score for {}",
                empty.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            );
            warn!("dropping column {}: {reason}", inst.name);
            dropped.push(Dropped {
                column: inst.name.clone(),
                reason,
            });
        }
    }
    if keep.is_empty() {
        return Err(Error::Aggregation("every metric column has a method without defined scores".into()));
    }
    let scores = restrict(&scores, &keep);
    let columns: Vec<MetricInstance> = keep.iter().map(|&j| instances[j].clone()).collect();
    let matrix = build_score_matrix(&scores)?;

    let mut notes = Vec::new();
    let mut correlations = Vec::new();
    if scores.methods.len() < 3 {
        let note = format!(
            "correlations skipped: {} methods, at least 3 needed",
            scores.methods.len()
        );
        info!("{note}");
        notes.push(note);
    } else {
        let cs = CorrelationSettings {
            alpha: settings.alpha,
            trials: settings.trials,
            seed: settings.seed,
        };
        for (name, sel, fams) in groups(&columns) {
            correlations.push(correlate_metrics(&name, &matrix, &sel, &fams, &cs)?);
        }
    }

    let mut ranks = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        match rank_methods(&scores, j, c.direction) {
            Ok(t) => ranks.push(t),
            Err(Error::Aggregation(msg)) => {
                warn!("no ranking for {}: {msg}", c.name);
                notes.push(format!("ranking skipped for {}: {msg}", c.name));
            }
            Err(e) => return Err(e),
        }
    }

    Ok(Report {
        settings,
        methods: scores.methods.clone(),
        images: scores.images.clone(),
        columns,
        matrix,
        dropped_columns: dropped,
        correlations,
        ranks,
        notes,
    })
}

pub fn plot_data(report: &Report) -> PlotData {
    PlotData {
        heatmaps: report
            .correlations
            .iter()
            .map(|c| Heatmap {
                group: c.group.clone(),
                columns: c.columns.clone(),
                tau: c.tau.clone(),
                significant: c.full_mask.clone(),
                family_significant: c.family_mask.clone(),
            })
            .collect(),
        rank_bump: report
            .ranks
            .iter()
            .map(|r| RankBump {
                column: r.column.clone(),
                direction: r.direction,
                ranks: r
                    .methods
                    .iter()
                    .zip(&r.average)
                    .map(|(m, &a)| BumpEntry {
                        method: m.clone(),
                        average_rank: a,
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn square_csv<T>(columns: &[String], cells: &[Vec<T>], fmt: impl Fn(&T) -> String) -> String {
    let mut s = String::from("column");
    for c in columns {
        write!(s, ",{c}").unwrap();
    }
    s.push('\n');
    for (c, row) in columns.iter().zip(cells) {
        s.push_str(c);
        for v in row {
            write!(s, ",{}", fmt(v)).unwrap();
        }
        s.push('\n');
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Input(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes `matrix.csv`, the per-group `tau_`, `pvals_`, `holm_mask_` and
/// `holm_family_mask_` files, one `ranks_<column>.csv` per column and
/// `report.json`.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let m = &report.matrix;
    let mut s = String::from("method");
    for c in &m.columns {
        write!(s, ",{c}").unwrap();
    }
    s.push('\n');
    for (method, row) in m.methods.iter().zip(&m.values) {
        s.push_str(method);
        for v in row {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    write(dir, "matrix.csv", &s)?;

    for c in &report.correlations {
        let g = &c.group;
        write(dir, &format!("tau_{g}.csv"), &square_csv(&c.columns, &c.tau, |v| opt(*v)))?;
        write(dir, &format!("pvals_{g}.csv"), &square_csv(&c.columns, &c.p_values, |v| opt(*v)))?;
        write(dir, &format!("holm_mask_{g}.csv"), &square_csv(&c.columns, &c.full_mask, |b| b.to_string()))?;
        write(
            dir,
            &format!("holm_family_mask_{g}.csv"),
            &square_csv(&c.columns, &c.family_mask, |b| b.to_string()),
        )?;
    }

    for r in &report.ranks {
        let mut s = String::from("image_id");
        for m in &r.methods {
            write!(s, ",{m}").unwrap();
        }
        s.push('\n');
        for (img, row) in r.images.iter().zip(&r.per_image) {
            s.push_str(img);
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s.push_str("average");
        for v in &r.average {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
        write(dir, &format!("ranks_{}.csv", r.column), &s)?;
    }

    write(dir, "report.json", &to_json(report)?)
}

pub fn write_plot_data(dir: &Path, report: &Report) -> Result<()> {
    write(dir, "plot_data.json", &to_json(&plot_data(report))?)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}
