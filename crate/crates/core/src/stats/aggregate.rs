//! Reduction of per-image scores: curve AUC, the methods × metric-instances
//! score matrix, and per-metric rank tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::correlation::midranks;

/// Trapezoidal area under `y` over the increasing grid `x` in `[0, 1]`.
pub fn auc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "curve has {} x values and {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Parameter("AUC needs at least two curve points".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || x[0] < 0.0 || x[x.len() - 1] > 1.0 {
        return Err(Error::Parameter("curve x-grid must increase strictly within [0, 1]".into()));
    }
    Ok(x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / 2.0)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Per-image scores indexed `[method][column][image]`; `None` marks an
/// undefined score.
#[derive(Debug, Clone, PartialEq)]
pub struct PerImageScores {
    pub methods: Vec<String>,
    pub columns: Vec<String>,
    pub images: Vec<String>,
    pub values: Vec<Vec<Vec<Option<f64>>>>,
}

impl PerImageScores {
    pub fn new(methods: Vec<String>, columns: Vec<String>, images: Vec<String>) -> Self {
        let values = vec![vec![vec![None; images.len()]; columns.len()]; methods.len()];
        Self {
            methods,
            columns,
            images,
            values,
        }
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn method_index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub methods: Vec<String>,
    pub columns: Vec<String>,
    /// `values[i][j]`: mean over included images of method `i`, column `j`.
    pub values: Vec<Vec<f64>>,
    pub included: Vec<Vec<usize>>,
    pub excluded: Vec<Vec<usize>>,
}

impl ScoreMatrix {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn total_excluded(&self) -> usize {
        self.excluded.iter().flatten().sum()
    }
}

/// Averages every cell over its defined scores.
pub fn build_score_matrix(scores: &PerImageScores) -> Result<ScoreMatrix> {
    let (rows, cols) = (scores.methods.len(), scores.columns.len());
    let mut values = vec![vec![0.0; cols]; rows];
    let mut included = vec![vec![0; cols]; rows];
    let mut excluded = vec![vec![0; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let cell = &scores.values[i][j];
            let defined: Vec<f64> = cell.iter().flatten().copied().collect();
            if defined.is_empty() {
                return Err(Error::Aggregation(format!(
                    "no defined scores for method {:?}, metric {:?}",
                    scores.methods[i], scores.columns[j]
                )));
            }
            values[i][j] = defined.iter().sum::<f64>() / defined.len() as f64;
            included[i][j] = defined.len();
            excluded[i][j] = cell.len() - defined.len();
        }
    }
    Ok(ScoreMatrix {
        methods: scores.methods.clone(),
        columns: scores.columns.clone(),
        values,
        included,
        excluded,
    })
}

/// Ranks with 1 = best and midranks for ties.
pub fn rank_scores(scores: &[f64], direction: Direction) -> Vec<f64> {
    let keyed: Vec<f64> = match direction {
        Direction::HigherBetter => scores.iter().map(|v| -v).collect(),
        Direction::LowerBetter => scores.to_vec(),
    };
    midranks(&keyed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub column: String,
    pub direction: Direction,
    pub methods: Vec<String>,
    /// Image ids that were ranked.
    pub images: Vec<String>,
    /// `per_image[k][i]`: rank of method `i` on ranked image `k`.
    pub per_image: Vec<Vec<f64>>,
    pub average: Vec<f64>,
    /// Images skipped because at least one method had no defined score.
    pub excluded_images: usize,
}

/// Ranks methods on every image under one column and averages the ranks.
pub fn rank_methods(scores: &PerImageScores, column: usize, direction: Direction) -> Result<RankTable> {
    let methods = scores.methods.len();
    let mut per_image = Vec::new();
    let mut images = Vec::new();
    let mut excluded_images = 0;
    for (k, id) in scores.images.iter().enumerate() {
        let row: Option<Vec<f64>> = (0..methods).map(|i| scores.values[i][column][k]).collect();
        match row {
            Some(row) => {
                per_image.push(rank_scores(&row, direction));
                images.push(id.clone());
            }
            None => excluded_images += 1,
        }
    }
    if per_image.is_empty() {
        return Err(Error::Aggregation(format!(
            "no image has defined scores for every method under {:?}",
            scores.columns[column]
        )));
    }
    let average = (0..methods)
        .map(|i| per_image.iter().map(|r| r[i]).sum::<f64>() / per_image.len() as f64)
        .collect();
    Ok(RankTable {
        column: scores.columns[column].clone(),
        direction,
        methods: scores.methods.clone(),
        images,
        per_image,
        average,
        excluded_images,
    })
}
