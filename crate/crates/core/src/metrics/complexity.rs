//! Conciseness of an attribution map: Gini sparseness, entropy complexity and
//! thresholded effective complexity. All operate on absolute attributions.

use super::MetricOutcome;
use crate::tensor::SaliencyMap;

/// Default threshold for effective complexity, as a fraction of the peak.
pub const DEFAULT_EPSILON: f64 = 0.1;

fn magnitudes(map: &SaliencyMap) -> Vec<f64> {
    map.data().iter().map(|v| v.abs()).collect()
}

/// Gini index of `|a|`: 0 for a constant map, `(n-1)/n` for a one-hot map.
pub fn sparseness(map: &SaliencyMap) -> MetricOutcome {
    let mut v = magnitudes(map);
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return MetricOutcome::Undefined("all-zero attribution map".into());
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let weighted: f64 = v
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i + 1) as f64 - n - 1.0) * x)
        .sum();
    MetricOutcome::Scalar(weighted / (n * total))
}

/// Shannon entropy (natural log) of the fractional contributions `|a_i|/Σ|a|`.
pub fn complexity(map: &SaliencyMap) -> MetricOutcome {
    let v = magnitudes(map);
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return MetricOutcome::Undefined("all-zero attribution map".into());
    }
    let h = v
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let p = x / total;
            -p * p.ln()
        })
        .sum::<f64>();
    MetricOutcome::Scalar(h.max(0.0))
}

/// Number of attributions whose magnitude exceeds `epsilon` times the peak
/// magnitude. An all-zero map counts 0.
pub fn effective_complexity(map: &SaliencyMap, epsilon: f64) -> usize {
    let v = magnitudes(map);
    let peak = v.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0;
    }
    v.iter().filter(|&&x| x / peak > epsilon).count()
}
