//! Sharpe ratios, paired outperformance statistics and histogram binning.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Significance threshold for the paired t-statistic.
pub const T_CRITICAL: f64 = 3.125;

/// Relative floor under which a standard deviation is treated as zero.
const ZERO_STD_REL: f64 = 1e-10;

fn mean_std(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort(n));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let std = linalg::sqrt(var);
    if std == 0.0 || std <= ZERO_STD_REL * linalg::abs(mean) {
        return Err(Error::ZeroVariance);
    }
    Ok((mean, std))
}

/// Annualized Sharpe ratio with a zero risk-free rate.
pub fn sharpe(returns: &[f64], periods_per_year: f64) -> Result<f64> {
    let (mean, std) = mean_std(returns)?;
    Ok(mean / std * linalg::sqrt(periods_per_year))
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooShort(a.len()));
    }
    Ok(())
}

/// Mean pathwise Sharpe difference `mean(S_A − S_B)`.
pub fn outperformance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64)
}

/// `√N · mean(d)/std(d)` for `d = S_A − S_B`, sample std with `N − 1` divisor.
pub fn t_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, std) = mean_std(&d)?;
    Ok(linalg::sqrt(d.len() as f64) * mean / std)
}

pub fn is_significant(t: f64, critical: f64) -> bool {
    linalg::abs(t) > critical
}

/// All pairwise statistics between the columns of a paths × methods
/// Sharpe matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseStats {
    pub delta_s: DMatrix<f64>,
    pub tstat: DMatrix<f64>,
    /// Pairs `(i, j)`, `i < j`, whose Sharpe ratios agree on every path. Their
    /// t-statistic is stored as 0.
    pub zero_variance_pairs: Vec<(usize, usize)>,
}

pub fn pairwise(sharpe: &DMatrix<f64>) -> Result<PairwiseStats> {
    let m = sharpe.ncols();
    let cols: Vec<Vec<f64>> = (0..m).map(|j| sharpe.column(j).iter().copied().collect()).collect();
    let mut delta_s = DMatrix::zeros(m, m);
    let mut tstat = DMatrix::zeros(m, m);
    let mut zero_variance_pairs = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let ds = outperformance(&cols[i], &cols[j])?;
            delta_s[(i, j)] = ds;
            delta_s[(j, i)] = -ds;
            match t_statistic(&cols[i], &cols[j]) {
                Ok(t) => {
                    tstat[(i, j)] = t;
                    tstat[(j, i)] = -t;
                }
                Err(Error::ZeroVariance) => zero_variance_pairs.push((i, j)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(PairwiseStats {
        delta_s,
        tstat,
        zero_variance_pairs,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Freedman-Diaconis bin edges over `values`; the last bin is closed.
pub fn freedman_diaconis_edges(values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return alloc::vec![0.0, 1.0];
    }
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if hi == lo {
        return alloc::vec![lo - 0.5, hi + 0.5];
    }
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr / libm::cbrt(sorted.len() as f64);
    let bins = if width > 0.0 {
        (libm::ceil((hi - lo) / width) as usize).clamp(1, 1000)
    } else {
        1
    };
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + k as f64 * step).collect();
    edges.push(hi);
    edges
}

/// Counts per bin `[e_k, e_{k+1})`, the last bin including its right edge.
/// Values outside the edges are not counted.
pub fn histogram(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len().saturating_sub(1);
    let mut counts = alloc::vec![0usize; bins];
    if bins == 0 {
        return counts;
    }
    for &v in values {
        if !(v >= edges[0] && v <= edges[bins]) {
            continue;
        }
        let k = edges[1..].partition_point(|e| *e <= v).min(bins - 1);
        counts[k] += 1;
    }
    counts
}
