//! Association scores used to rank candidate covariates against residuals.

use crate::error::{Error, Result};

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("correlation needs at least two points".into()));
    }
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
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold rank start+1 ..= end
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// `1 − Σ(t³ − t) / (N³ − N)` over tie groups of `values`.
pub fn tie_correction(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 1.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    1.0 - ties / (n * n * n - n)
}

fn level_slot(level: i8) -> usize {
    match level {
        -1 => 0,
        0 => 1,
        1 => 2,
        other => panic!("genotype level {other} outside {{-1, 0, 1}}"),
    }
}

/// Kruskal-Wallis statistic from precomputed ranks.
///
/// `tie_correction` is the divisor from [`tie_correction`]; a value of zero
/// (every observation tied) yields 0.
pub fn kruskal_wallis_from_ranks(ranks: &[f64], tie_corr: f64, groups: &[i8]) -> Result<f64> {
    if ranks.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: ranks.len(),
            right: groups.len(),
        });
    }
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for (&r, &g) in ranks.iter().zip(groups) {
        let s = level_slot(g);
        sums[s] += r;
        counts[s] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleGroup);
    }
    if tie_corr <= 0.0 {
        return Ok(0.0);
    }
    let n = ranks.len() as f64;
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s * s / c as f64)
        .sum();
    let h = 12.0 / (n * (n + 1.0)) * between - 3.0 * (n + 1.0);
    Ok((h / tie_corr).max(0.0))
}

/// Kruskal-Wallis H statistic of `values` grouped by genotype level.
pub fn kruskal_wallis(values: &[f64], groups: &[i8]) -> Result<f64> {
    if values.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: groups.len(),
        });
    }
    kruskal_wallis_from_ranks(&average_ranks(values), tie_correction(values), groups)
}
