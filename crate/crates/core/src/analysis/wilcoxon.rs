//! Wilcoxon signed-rank and rank-sum tests. Exact null distributions come from
//! dynamic programming over doubled midranks, so ties stay integral.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::stats::{sided, Alternative};
use super::AnalysisError;

/// Samples up to this size use the exact null distribution.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    /// V (signed-rank) or U of the first sample (rank-sum).
    pub statistic: f64,
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `x`, doubled so tied ranks stay integers.
fn doubled_ranks(x: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0u64; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // positions i..=j share rank (i+1 + j+1)/2
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &idx[i..=j] {
            ranks[k] = r2;
        }
        i = j + 1;
    }
    ranks
}

fn tie_term(x: &[f64]) -> f64 {
    let mut s: Vec<f64> = x.to_vec();
    s.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut i = 0;
    while i < s.len() {
        let j = s[i..].iter().take_while(|&&v| v == s[i]).count();
        let t = j as f64;
        sum += t * t * t - t;
        i += j;
    }
    sum
}

/// Upper and lower tail of a discrete null given counts per doubled statistic.
fn tails(counts: &[f64], observed2: u64) -> (f64, f64) {
    let total: f64 = counts.iter().sum();
    let o = observed2 as usize;
    let upper: f64 = counts[o.min(counts.len())..].iter().sum();
    let lower: f64 = counts[..=o.min(counts.len() - 1)].iter().sum();
    (upper / total, lower / total)
}

pub fn wilcoxon_signed_rank(values: &[f64], mu0: f64, alt: Alternative) -> Result<RankTest, AnalysisError> {
    let d: Vec<f64> = values.iter().map(|v| v - mu0).filter(|&d| d != 0.0).collect();
    if d.is_empty() {
        return Err(AnalysisError::Degenerate("all differences are zero".into()));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain("non-finite difference".into()));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let r2 = doubled_ranks(&abs);
    let v2: u64 = d.iter().zip(&r2).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    if n <= EXACT_MAX_N {
        let max: u64 = r2.iter().sum();
        let mut counts = vec![0f64; max as usize + 1];
        counts[0] = 1.0;
        for &r in &r2 {
            for s in (r as usize..counts.len()).rev() {
                counts[s] += counts[s - r as usize];
            }
        }
        let (upper, lower) = tails(&counts, v2);
        return Ok(RankTest {
            statistic: v2 as f64 / 2.0,
            p: sided(upper, lower, alt),
            exact: true,
        });
    }
    let nf = n as f64;
    let v = v2 as f64 / 2.0;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&abs) / 48.0;
    Ok(RankTest {
        statistic: v,
        p: normal_tails(v, mean, var, alt),
        exact: false,
    })
}

fn normal_tails(stat: f64, mean: f64, var: f64, alt: Alternative) -> f64 {
    let n = Normal::standard();
    let sd = var.sqrt();
    // continuity correction toward the mean
    let upper = n.sf((stat - mean - 0.5) / sd);
    let lower = n.cdf((stat - mean + 0.5) / sd);
    sided(upper, lower, alt)
}

/// Mann–Whitney U of `a` against `b`.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], alt: Alternative) -> Result<RankTest, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::Degenerate("rank-sum test needs two non-empty samples".into()));
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    if all.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain("non-finite value".into()));
    }
    let r2 = doubled_ranks(&all);
    let (na, nb) = (a.len(), b.len());
    let ra2: u64 = r2[..na].iter().sum();
    let offset2 = (na * (na + 1)) as u64;
    let u2 = ra2 - offset2;
    if na <= EXACT_MAX_N && nb <= EXACT_MAX_N {
        let max: usize = r2.iter().sum::<u64>() as usize;
        // ways[j][s]: subsets of size j with doubled rank sum s
        let mut ways = vec![vec![0f64; max + 1]; na + 1];
        ways[0][0] = 1.0;
        for &r in &r2 {
            let r = r as usize;
            for j in (1..=na).rev() {
                let (lo, hi) = ways.split_at_mut(j);
                for s in (r..=max).rev() {
                    hi[0][s] += lo[j - 1][s - r];
                }
            }
        }
        let (upper, lower) = tails(&ways[na], ra2);
        return Ok(RankTest {
            statistic: u2 as f64 / 2.0,
            p: sided(upper, lower, alt),
            exact: true,
        });
    }
    let (naf, nbf) = (na as f64, nb as f64);
    let nf = naf + nbf;
    let u = u2 as f64 / 2.0;
    let mean = naf * nbf / 2.0;
    let var = naf * nbf / 12.0 * ((nf + 1.0) - tie_term(&all) / (nf * (nf - 1.0)));
    Ok(RankTest {
        statistic: u,
        p: normal_tails(u, mean, var, alt),
        exact: false,
    })
}
