//! Correlation coefficients. `None` marks an undefined coefficient (a
//! zero-variance or all-tied input); callers exclude it rather than impute.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Parameter("correlation needs at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("correlation inputs must be finite".into()));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // relative guard: a series whose spread is pure rounding noise is constant
    let scale = |s: f64, m: f64| s <= f64::EPSILON * f64::EPSILON * n * (1.0 + m * m);
    if scale(sxx, mx) || scale(syy, my) {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Ascending ranks starting at 1, ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on midranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    pearson(&midranks(x), &midranks(y))
}

/// Pairs with `t` tied values contribute `t(t-1)/2`; input must be sorted.
fn tied_pairs(sorted: impl Iterator<Item = (f64, f64)>, same: impl Fn(&(f64, f64), &(f64, f64)) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<(f64, f64)> = None;
    for item in sorted {
        match prev {
            Some(p) if same(&p, &item) => run += 1,
            _ => {
                total += run * (run + 1) / 2;
                run = 0;
            }
        }
        prev = Some(item);
    }
    total + run * (run + 1) / 2
}

/// Merge sort on `ys`, returning the number of inversions (swaps).
fn sort_counting_swaps(ys: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = ys.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        sort_counting_swaps(lo, blo) + sort_counting_swaps(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if ys[j] < ys[i] {
            buf[k] = ys[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = ys[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&ys[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&ys[j..n]);
    ys.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's τ_b, `(p - q) / sqrt((p+q+t)(p+q+u))`, in `O(n log n)`
/// (Knight's algorithm). `None` when either input is entirely tied.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    Ok(kendall_unchecked(x, y))
}

fn kendall_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let total = n * (n - 1) / 2;
    let tied_x = tied_pairs(pairs.iter().copied(), |a, b| a.0 == b.0);
    let tied_xy = tied_pairs(pairs.iter().copied(), |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let tied_y = tied_pairs(ys.iter().map(|&v| (v, 0.0)), |a, b| a.0 == b.0);

    if tied_x == total || tied_y == total {
        return None;
    }
    let numerator = total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denominator = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    Some((numerator / denominator).clamp(-1.0, 1.0))
}

/// Largest `n` for which the permutation test enumerates all `n!` orderings.
pub const EXACT_PERMUTATION_LIMIT: usize = 7;

const TAU_TOLERANCE: f64 = 1e-12;

/// Two-sided permutation p-value for τ_b: the fraction of permutations of
/// `y` whose `|τ|` reaches the observed `|τ|`. Exact for
/// `n <= EXACT_PERMUTATION_LIMIT`; otherwise `trials` seeded shuffles plus
/// the identity.
pub fn kendall_p_value(x: &[f64], y: &[f64], trials: usize, seed: u64) -> Result<Option<f64>> {
    let Some(observed) = kendall_tau_b(x, y)? else {
        return Ok(None);
    };
    let threshold = observed.abs() - TAU_TOLERANCE;
    let reaches = |perm: &[f64]| kendall_unchecked(x, perm).is_some_and(|t| t.abs() >= threshold);

    if x.len() <= EXACT_PERMUTATION_LIMIT {
        let mut perm = y.to_vec();
        let (mut hits, mut count) = (0u64, 0u64);
        heap_permutations(&mut perm, &mut |p| {
            count += 1;
            if reaches(p) {
                hits += 1;
            }
        });
        return Ok(Some(hits as f64 / count as f64));
    }

    if trials == 0 {
        return Err(Error::Parameter("Monte Carlo permutation test needs trials >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    let mut perm = y.to_vec();
    let mut hits = 1u64;
    for _ in 0..trials {
        perm.shuffle(&mut rng);
        if reaches(&perm) {
            hits += 1;
        }
    }
    Ok(Some(hits as f64 / (trials as f64 + 1.0)))
}

/// Visits every permutation of `items` (Heap's algorithm, iterative).
fn heap_permutations(items: &mut [f64], visit: &mut impl FnMut(&[f64])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Fraction of concordant pairs implied by τ when neither ranking has ties.
pub fn concordance_percentage(tau: f64) -> f64 {
    (tau + 1.0) / 2.0
}
