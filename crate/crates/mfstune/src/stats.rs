//! Strategy comparison statistics: medians over repetitions, the extra
//! distinct-suggestion bonus, and two-sided Mann-Whitney U tests (exact by
//! enumeration for small tie-free samples, normal approximation with tie and
//! continuity corrections otherwise).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tuner::TuningResult;

/// Rank-sum threshold below which the exact null distribution is enumerated.
const EXACT_ENUMERATION_LIMIT: usize = 20;

/// Midranks of the pooled sample; ties share the average rank.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].partial_cmp(&pooled[j]).unwrap());
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a tie group spanning positions i..j gets the
        // average of those ranks.
        let shared = (i + j + 1) as f64 / 2.0;
        for k in i..j {
            ranks[order[k]] = shared;
        }
        i = j;
    }
    ranks
}

/// Exact two-sided p-value by dynamic programming over the distribution of
/// the rank sum of a size-`n_a` subset of ranks 1..=N (tie-free case):
/// p = P(|U' - n_a n_b / 2| >= |u_a - n_a n_b / 2|).
fn exact_two_sided_p(n_a: usize, n_b: usize, u_a: f64) -> f64 {
    let n = n_a + n_b;
    let min_sum = n_a * (n_a + 1) / 2;
    let top = n_a * (2 * n - n_a + 1) / 2;
    // counts[k][s]: subsets of size k of the ranks seen so far with sum s.
    let mut counts = vec![vec![0.0f64; top + 1]; n_a + 1];
    counts[0][0] = 1.0;
    for rank in 1..=n {
        for k in (1..=n_a.min(rank)).rev() {
            for s in (rank..=top).rev() {
                let add = counts[k - 1][s - rank];
                if add != 0.0 {
                    counts[k][s] += add;
                }
            }
        }
    }
    let total: f64 = counts[n_a].iter().sum();
    // Two-sided deviation measured in units of 2U to stay in integers.
    let center = (n_a * n_b) as f64;
    let observed_dev = (2.0 * u_a - center).abs();
    let mut extreme = 0.0;
    for (s, count) in counts[n_a].iter().enumerate() {
        if *count == 0.0 {
            continue;
        }
        let u = s as f64 - min_sum as f64;
        if (2.0 * u - center).abs() >= observed_dev - 1e-9 {
            extreme += count;
        }
    }
    (extreme / total).min(1.0)
}

/// Two-sided Mann-Whitney U test. Returns (U of the first sample, p-value).
///
/// Exact enumeration when the pooled size is at most 20 and the data carry
/// no ties; otherwise the normal approximation with tie-corrected variance
/// and a continuity correction shrinking |U - mean| by 1/2.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "Mann-Whitney requires non-empty samples".into(),
        ));
    }
    if a.iter().chain(b.iter()).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(
            "Mann-Whitney samples must not contain NaN".into(),
        ));
    }
    let (n_a, n_b) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b.iter()).cloned().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;

    // Tie census over the pooled sample.
    let mut sorted = pooled.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        if j - i > 1 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        i = j;
    }

    let p = if n_a + n_b <= EXACT_ENUMERATION_LIMIT && !has_ties {
        exact_two_sided_p(n_a, n_b, u_a)
    } else {
        let n = (n_a + n_b) as f64;
        let mean = (n_a * n_b) as f64 / 2.0;
        let var = (n_a * n_b) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
        if var <= 0.0 {
            // Every pooled value identical: no evidence of a difference.
            1.0
        } else {
            let z = ((u_a - mean).abs() - 0.5).max(0.0) / var.sqrt();
            (libm::erfc(z / std::f64::consts::SQRT_2)).min(1.0)
        }
    };
    Ok((u_a, p))
}

/// Median of a sample (average of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("median of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Repetitions below which significance is not assessed.
const MIN_REPETITIONS_FOR_TEST: usize = 2;

/// Side-by-side summary of a standard arm and its preemptive counterpart,
/// paired by seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Median best quality of the standard (full-trial) arm.
    pub median_standard: f64,
    /// Median best quality of the preemptive arm.
    pub median_preemptive: f64,
    /// Median number of extra distinct suggestions the preemptive arm
    /// afforded, paired by seed.
    pub bonus: f64,
    /// Mann-Whitney U of the standard arm's best-quality sample.
    pub u_statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Significance at the 0.05 level; `None` when too few repetitions.
    pub significant: Option<bool>,
}

/// Compare paired repetitions of a standard and a preemptive arm.
pub fn compare_strategies(
    standard: &[TuningResult],
    preemptive: &[TuningResult],
) -> Result<ComparisonReport> {
    if standard.len() != preemptive.len() {
        return Err(Error::InvalidArgument(format!(
            "mismatched repetition counts: {} standard vs {} preemptive",
            standard.len(),
            preemptive.len()
        )));
    }
    if standard.is_empty() {
        return Err(Error::InvalidArgument("no repetitions to compare".into()));
    }
    let best_s: Vec<f64> = standard.iter().map(|r| r.best_mean).collect();
    let best_p: Vec<f64> = preemptive.iter().map(|r| r.best_mean).collect();
    let bonus: Vec<f64> = standard
        .iter()
        .zip(preemptive)
        .map(|(s, p)| p.distinct_theta as f64 - s.distinct_theta as f64)
        .collect();
    let (u, p_value) = mann_whitney_u(&best_s, &best_p)?;
    let significant = if standard.len() >= MIN_REPETITIONS_FOR_TEST {
        Some(p_value < 0.05)
    } else {
        None
    };
    Ok(ComparisonReport {
        median_standard: median(&best_s)?,
        median_preemptive: median(&best_p)?,
        bonus: median(&bonus)?,
        u_statistic: u,
        p_value,
        significant,
    })
}
