//! The per-image scores table and its CSV form.
//!
//! Columns: `image_id,method,metric,baseline,value,curve`. `baseline` is
//! empty for metrics without one, `value` is `undefined` for undefined
//! outcomes and holds the AUC for curves, and `curve` lists the points as
//! space-separated `x:y` pairs (empty for scalars).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Curve, Metric, MetricFamily};
use crate::stats::{Direction, PerImageScores};

pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub image_id: String,
    pub method: String,
    pub metric: Metric,
    pub baseline: Option<String>,
    /// `None` for an undefined outcome.
    pub value: Option<f64>,
    pub curve: Option<Curve>,
}

impl ScoreRow {
    pub fn column(&self) -> String {
        column_name(self.metric, self.baseline.as_deref())
    }
}

/// Metric-instance name: `metric` or `metric@baseline`.
pub fn column_name(metric: Metric, baseline: Option<&str>) -> String {
    match baseline {
        Some(b) => format!("{}@{b}", metric.name()),
        None => metric.name().to_owned(),
    }
}

/// A metric crossed with (at most) one baseline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricInstance {
    pub name: String,
    pub metric: Metric,
    pub family: MetricFamily,
    pub baseline: Option<String>,
    pub direction: Direction,
}

impl MetricInstance {
    pub fn new(metric: Metric, baseline: Option<&str>) -> Self {
        Self {
            name: column_name(metric, baseline),
            metric,
            family: metric.family(),
            baseline: baseline.map(str::to_owned),
            direction: metric.direction(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoresTable {
    rows: Vec<ScoreRow>,
    keys: HashSet<(String, String, String)>,
}

impl ScoresTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row; each (image, method, metric instance) appears once.
    pub fn push(&mut self, row: ScoreRow) -> Result<()> {
        let key = (row.image_id.clone(), row.method.clone(), row.column());
        if !self.keys.insert(key) {
            return Err(Error::Input(format!(
                "duplicate score for image {:?}, method {:?}, {:?}",
                row.image_id,
                row.method,
                row.column()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(["image_id", "method", "metric", "baseline", "value", "curve"])
            .map_err(csv_error)?;
        for r in &self.rows {
            let value = r.value.map_or_else(|| UNDEFINED.to_owned(), |v| v.to_string());
            let curve = r
                .curve
                .as_ref()
                .map(|c| {
                    c.x.iter()
                        .zip(&c.y)
                        .map(|(x, y)| format!("{x}:{y}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_default();
            w.write_record([
                r.image_id.as_str(),
                r.method.as_str(),
                r.metric.name(),
                r.baseline.as_deref().unwrap_or(""),
                value.as_str(),
                curve.as_str(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path).map_err(csv_error)?;
        let header = rd.headers().map_err(csv_error)?.clone();
        if header.iter().collect::<Vec<_>>() != ["image_id", "method", "metric", "baseline", "value", "curve"] {
            return Err(Error::Input(format!("{}: unexpected header {header:?}", path.display())));
        }
        let mut table = Self::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            let bad = |what: &str| Error::Input(format!("{}: row {}: {what}", path.display(), line + 1));
            let metric: Metric = rec[2].parse().map_err(|_| bad("unknown metric"))?;
            let value = match &rec[4] {
                UNDEFINED => None,
                v => Some(v.parse::<f64>().map_err(|_| bad("bad value"))?),
            };
            let curve = if rec[5].is_empty() {
                None
            } else {
                let mut c = Curve { x: Vec::new(), y: Vec::new() };
                for pt in rec[5].split(' ') {
                    let (x, y) = pt.split_once(':').ok_or_else(|| bad("bad curve point"))?;
                    c.x.push(x.parse().map_err(|_| bad("bad curve x"))?);
                    c.y.push(y.parse().map_err(|_| bad("bad curve y"))?);
                }
                Some(c)
            };
            table.push(ScoreRow {
                image_id: rec[0].to_owned(),
                method: rec[1].to_owned(),
                metric,
                baseline: (!rec[3].is_empty()).then(|| rec[3].to_owned()),
                value,
                curve,
            })?;
        }
        Ok(table)
    }

    /// Metric instances in first-appearance order.
    pub fn instances(&self) -> Vec<MetricInstance> {
        let mut out: Vec<MetricInstance> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|i| i.name == r.column()) {
                out.push(MetricInstance::new(r.metric, r.baseline.as_deref()));
            }
        }
        out
    }

    /// Dense method × instance × image cube; missing rows (failures) and
    /// undefined outcomes are both `None`.
    pub fn per_image(&self) -> PerImageScores {
        let mut methods: Vec<String> = Vec::new();
        let mut images: Vec<String> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
            if !images.contains(&r.image_id) {
                images.push(r.image_id.clone());
            }
        }
        let columns: Vec<String> = self.instances().into_iter().map(|i| i.name).collect();
        let mut scores = PerImageScores::new(methods, columns, images);
        for r in &self.rows {
            let i = scores.method_index(&r.method).expect("collected above");
            let j = scores.column_index(&r.column()).expect("collected above");
            let k = scores.images.iter().position(|x| *x == r.image_id).expect("collected above");
            scores.values[i][j][k] = r.value;
        }
        scores
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}
