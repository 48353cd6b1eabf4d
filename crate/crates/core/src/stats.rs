//! Two-sample Wilcoxon rank-sum (Mann-Whitney U) test and the
//! Vargha-Delaney A12 effect size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Significance level for rejecting the null hypothesis.
pub const ALPHA: f64 = 0.05;

/// Largest combined sample size tested with the exact distribution.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    XDominates,
    YDominates,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    /// Conventional labels for `max(a12, 1 - a12)` at 0.56, 0.64 and 0.71.
    pub fn of(a12: f64) -> Self {
        let m = a12.max(1.0 - a12);
        if m < 0.56 {
            Magnitude::Negligible
        } else if m < 0.64 {
            Magnitude::Small
        } else if m < 0.71 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    /// Mann-Whitney U of the first sample.
    pub u_statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub a12: f64,
    pub magnitude: Magnitude,
    pub n_x: usize,
    pub n_y: usize,
    pub method: TestMethod,
    /// Which sample tends to be larger, by A12.
    pub direction: Direction,
}

impl StatTestResult {
    pub fn rejects_null(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Two-sided Wilcoxon rank-sum test of `x` against `y`, with A12.
///
/// Uses the exact null distribution of U when the samples together hold
/// at most [`EXACT_MAX_N`] values and none are tied, and otherwise the
/// normal approximation with tie-corrected variance and continuity
/// correction. Tied values get their mid-rank.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<StatTestResult> {
    check_samples(x, y)?;
    let (nx, ny) = (x.len(), y.len());
    let n = nx + ny;
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum: f64 = ranks[..nx].iter().sum();
    let u = rank_sum - (nx * (nx + 1)) as f64 / 2.0;

    pooled.sort_by(f64::total_cmp);
    let tie_groups = tie_sizes(&pooled);
    let has_ties = tie_groups.iter().any(|&t| t > 1);

    let (p_value, method) = if n <= EXACT_MAX_N && !has_ties {
        (exact_p_value(u.round() as usize, nx, ny), TestMethod::Exact)
    } else {
        (normal_p_value(u, nx, ny, &tie_groups), TestMethod::NormalApprox)
    };
    let a12 = vargha_delaney_a12(x, y)?;
    let direction = if a12 > 0.5 {
        Direction::XDominates
    } else if a12 < 0.5 {
        Direction::YDominates
    } else {
        Direction::None
    };
    Ok(StatTestResult {
        u_statistic: u,
        p_value,
        a12,
        magnitude: Magnitude::of(a12),
        n_x: nx,
        n_y: ny,
        method,
        direction,
    })
}

/// Probability that a value drawn from `x` exceeds one drawn from `y`,
/// counting ties as one half.
pub fn vargha_delaney_a12(x: &[f64], y: &[f64]) -> Result<f64> {
    check_samples(x, y)?;
    let mut wins = 0.0;
    for &xi in x {
        for &yj in y {
            if xi > yj {
                wins += 1.0;
            } else if xi == yj {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (x.len() * y.len()) as f64)
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidSample(format!("samples of size {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidSample("sample contains NaN".into()));
    }
    Ok(())
}

/// 1-based ranks, ties sharing the mean of their positions.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn tie_sizes(sorted: &[f64]) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let end = start + sorted[start..].iter().take_while(|&&v| v == sorted[start]).count();
        sizes.push(end - start);
        start = end;
    }
    sizes
}

/// Number of rank assignments giving each value of U, for samples of
/// sizes `nx` and `ny` without ties.
fn u_distribution(nx: usize, ny: usize) -> Vec<u64> {
    // ways[m][k][u]: choosing m of the k smallest ranks, U = u
    let max_u = nx * ny;
    let mut prev: Vec<Vec<u64>> = vec![vec![0; max_u + 1]; nx + 1];
    prev[0][0] = 1;
    for k in 1..=nx + ny {
        let mut cur = prev.clone();
        for m in 1..=nx.min(k) {
            // rank k taken by x: it exceeds the k - m values of y below it
            let beaten = k - m;
            if beaten > ny {
                continue;
            }
            for u in beaten..=max_u {
                cur[m][u] += prev[m - 1][u - beaten];
            }
        }
        prev = cur;
    }
    prev.swap_remove(nx)
}

fn exact_p_value(u: usize, nx: usize, ny: usize) -> f64 {
    let dist = u_distribution(nx, ny);
    let total: u64 = dist.iter().sum();
    let lower: u64 = dist[..=u].iter().sum();
    let upper: u64 = dist[u..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

fn normal_p_value(u: f64, nx: usize, ny: usize, ties: &[usize]) -> f64 {
    let n = (nx + ny) as f64;
    let mean = (nx * ny) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = (nx * ny) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * standard.sf(z)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_small_case() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.method, TestMethod::Exact);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.direction, Direction::YDominates);
    }

    #[test]
    fn identical_samples() {
        let x = [0.3, 0.5, 0.9, 1.2];
        let r = wilcoxon_rank_sum(&x, &x).unwrap();
        assert!(r.p_value >= 0.99);
        assert_eq!(r.direction, Direction::None);
        assert_eq!(r.a12, 0.5);
        assert_eq!(r.method, TestMethod::NormalApprox);
    }

    #[test]
    fn a12_cases() {
        assert_eq!(vargha_delaney_a12(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(vargha_delaney_a12(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.25);
        assert_eq!(Magnitude::of(0.5), Magnitude::Negligible);
        assert_eq!(Magnitude::of(0.6), Magnitude::Small);
        assert_eq!(Magnitude::of(0.3), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.9), Magnitude::Large);
    }

    #[test]
    fn u_distribution_counts_subsets() {
        // C(4,2) = 6 subsets: U = 0,1,2,2,3,4
        assert_eq!(u_distribution(2, 2), vec![1, 1, 2, 1, 1]);
        assert_eq!(u_distribution(3, 4).iter().sum::<u64>(), 35);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(wilcoxon_rank_sum(&[], &[1.0]), Err(Error::InvalidSample(_))));
        assert!(vargha_delaney_a12(&[1.0], &[]).is_err());
    }
}
