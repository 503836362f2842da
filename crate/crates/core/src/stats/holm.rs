use crate::error::{Error, Result};

/// Family-wise error rate used throughout the meta-evaluation.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Holm-Bonferroni step-down procedure. Returns the rejection mask in the
/// original order of `pvals`.
pub fn holm_bonferroni(pvals: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Parameter(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut reject = vec![false; m];
    for (rank, &i) in order.iter().enumerate() {
        if pvals[i] > alpha / (m - rank) as f64 {
            break;
        }
        reject[i] = true;
    }
    Ok(reject)
}
