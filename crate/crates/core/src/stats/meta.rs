//! Pairwise concordance of metric columns with multiple-testing control.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::stats::aggregate::ScoreMatrix;
use crate::stats::correlation::{kendall_p_value, kendall_tau_b};
use crate::stats::holm::holm_bonferroni;

/// A named group of columns whose pairwise tests form one Holm family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    /// Positions within the report's column list.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSettings {
    pub alpha: f64,
    /// Monte Carlo permutations per pair when there are too many methods to
    /// enumerate.
    pub trials: usize,
    pub seed: u64,
}

impl Default for CorrelationSettings {
    fn default() -> Self {
        Self {
            alpha: super::holm::DEFAULT_ALPHA,
            trials: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub group: String,
    pub columns: Vec<String>,
    pub families: Vec<Family>,
    /// Symmetric; `None` where a column is entirely tied.
    pub tau: Vec<Vec<Option<f64>>>,
    pub p_values: Vec<Vec<Option<f64>>>,
    /// Holm rejections with every off-diagonal pair in one family.
    pub full_mask: Vec<Vec<bool>>,
    /// Holm rejections within each declared family; cross-family pairs are
    /// never marked.
    pub family_mask: Vec<Vec<bool>>,
    pub alpha: f64,
    pub degenerate_columns: Vec<String>,
}

/// Kendall τ_b and permutation p-values for every pair of the selected
/// columns (rows are methods), with Holm-Bonferroni corrections over the full
/// matrix and within each family.
pub fn correlate_metrics(
    group: &str,
    matrix: &ScoreMatrix,
    selection: &[usize],
    families: &[Family],
    settings: &CorrelationSettings,
) -> Result<CorrelationReport> {
    if matrix.methods.len() < 3 {
        return Err(Error::Aggregation(format!(
            "metric correlation needs at least 3 methods, got {}",
            matrix.methods.len()
        )));
    }
    let n = selection.len();
    if let Some(&j) = selection.iter().find(|&&j| j >= matrix.columns.len()) {
        return Err(Error::Parameter(format!("column {j} not in the score matrix")));
    }
    for fam in families {
        if let Some(&m) = fam.members.iter().find(|&&m| m >= n) {
            return Err(Error::Parameter(format!(
                "family {:?} refers to column {m} of {n}",
                fam.name
            )));
        }
    }
    let columns: Vec<Vec<f64>> = selection.iter().map(|&j| matrix.column(j)).collect();
    let names: Vec<String> = selection.iter().map(|&j| matrix.columns[j].clone()).collect();

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let tests: Vec<(Option<f64>, Option<f64>)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let tau = kendall_tau_b(&columns[a], &columns[b])?;
            let pair_seed = seed::derive(seed::derive(settings.seed, seed::label(&names[a])), seed::label(&names[b]));
            let p = kendall_p_value(&columns[a], &columns[b], settings.trials, pair_seed)?;
            Ok((tau, p))
        })
        .collect::<Result<_>>()?;

    let mut tau = vec![vec![None; n]; n];
    let mut p_values = vec![vec![None; n]; n];
    let degenerate: Vec<bool> = columns
        .iter()
        .map(|c| c.iter().all(|v| *v == c[0]))
        .collect();
    for a in 0..n {
        if !degenerate[a] {
            tau[a][a] = Some(1.0);
        }
    }
    for (&(a, b), &(t, p)) in pairs.iter().zip(&tests) {
        tau[a][b] = t;
        tau[b][a] = t;
        p_values[a][b] = p;
        p_values[b][a] = p;
    }

    let full_pairs: Vec<(usize, usize)> = pairs.clone();
    let full_mask = holm_mask(n, &full_pairs, &p_values, settings.alpha)?;

    let mut family_mask = vec![vec![false; n]; n];
    for fam in families {
        let fam_pairs: Vec<(usize, usize)> = pairs
            .iter()
            .copied()
            .filter(|(a, b)| fam.members.contains(a) && fam.members.contains(b))
            .collect();
        let mask = holm_mask(n, &fam_pairs, &p_values, settings.alpha)?;
        for a in 0..n {
            for b in 0..n {
                family_mask[a][b] |= mask[a][b];
            }
        }
    }

    Ok(CorrelationReport {
        group: group.to_string(),
        columns: names.clone(),
        families: families.to_vec(),
        tau,
        p_values,
        full_mask,
        family_mask,
        alpha: settings.alpha,
        degenerate_columns: names
            .iter()
            .zip(&degenerate)
            .filter(|(_, d)| **d)
            .map(|(c, _)| c.clone())
            .collect(),
    })
}

/// Holm over the pairs with a defined p-value; undefined pairs are left out
/// of the family size.
fn holm_mask(n: usize, pairs: &[(usize, usize)], p: &[Vec<Option<f64>>], alpha: f64) -> Result<Vec<Vec<bool>>> {
    let tested: Vec<(usize, usize, f64)> = pairs
        .iter()
        .filter_map(|&(a, b)| p[a][b].map(|v| (a, b, v)))
        .collect();
    let pvals: Vec<f64> = tested.iter().map(|t| t.2).collect();
    let reject = holm_bonferroni(&pvals, alpha)?;
    let mut mask = vec![vec![false; n]; n];
    for (&(a, b, _), r) in tested.iter().zip(reject) {
        mask[a][b] = r;
        mask[b][a] = r;
    }
    Ok(mask)
}
