use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::gating::average_ranks;
use crate::{Error, Result};

/// Largest combined sample size handled by the exact null distribution.
pub const EXACT_LIMIT: usize = 20;

/// Two-sided Wilcoxon rank-sum p-value for samples `a` and `b`.
///
/// Ties receive average ranks. Up to [`EXACT_LIMIT`] observations the null
/// distribution of the rank sum is enumerated exactly (conditional on the
/// tie pattern); above it a normal approximation with tie and continuity
/// corrections is used.
pub fn wilcoxon_ranksum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("rank-sum test needs two non-empty samples"));
    }
    if a.len() + b.len() <= EXACT_LIMIT {
        Ok(ranksum_exact(a, b))
    } else {
        Ok(ranksum_normal(a, b))
    }
}

fn pooled_ranks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    average_ranks(&pooled)
}

/// Exact branch, usable for any size (cost grows with `n * N^2`).
pub fn ranksum_exact(a: &[f64], b: &[f64]) -> f64 {
    let ranks = pooled_ranks(a, b);
    // doubled average ranks are integers
    let twice: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let n = a.len();
    let observed: usize = twice[..n].iter().sum();
    let max_sum: usize = twice.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0f64; max_sum + 1]; n + 1];
    ways[0][0] = 1.0;
    for &r in &twice {
        for k in (1..=n).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - r];
            }
        }
    }
    let total: f64 = ways[n].iter().sum();
    let below: f64 = ways[n][..=observed].iter().sum();
    let above: f64 = ways[n][observed..].iter().sum();
    (2.0 * below.min(above) / total).min(1.0)
}

/// Normal-approximation branch, usable for any size.
pub fn ranksum_normal(a: &[f64], b: &[f64]) -> f64 {
    let ranks = pooled_ranks(a, b);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let w: f64 = ranks[..a.len()].iter().sum();
    let mean = n1 * (n + 1.0) / 2.0;
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for r in &ranks {
        *counts.entry(r.to_bits()).or_default() += 1.0;
    }
    let ties: f64 = counts.values().map(|t| t * t * t - t).sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Win,
    Draw,
    Loss,
}

/// Challenger (`a`) against baseline (`b`) on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_b: f64,
    pub std_b: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl ComparisonCell {
    pub fn compare(a: &[f64], b: &[f64], alpha: f64) -> Result<Self> {
        let p_value = wilcoxon_ranksum(a, b)?;
        let (mean_a, std_a) = mean_std(a);
        let (mean_b, std_b) = mean_std(b);
        let verdict = if p_value >= alpha || mean_a == mean_b {
            Verdict::Draw
        } else if mean_a > mean_b {
            Verdict::Win
        } else {
            Verdict::Loss
        };
        Ok(ComparisonCell { mean_a, std_a, mean_b, std_b, p_value, verdict })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wdl {
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
}

impl Wdl {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Win => self.wins += 1,
            Verdict::Draw => self.draws += 1,
            Verdict::Loss => self.losses += 1,
        }
    }

    pub fn goal_diff(&self) -> i64 {
        self.wins as i64 - self.losses as i64
    }
}

impl std::fmt::Display for Wdl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-{}", self.wins, self.draws, self.losses)
    }
}
