//! Comparison statistics over repeated-run samples: Wilcoxon rank-sum,
//! Vargha-Delaney A12 and Scott-Knott clustering.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest combined sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least {needed} values, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("at least two groups are required")]
    TooFewGroups,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub method: String,
    pub values: Vec<f64>,
}

impl RunSample {
    pub fn new(method: impl Into<String>, values: Vec<f64>) -> Self {
        Self { method: method.into(), values }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Doubled mid-ranks of the pooled sample, plus tie-group sizes.
fn doubled_ranks(pooled: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, ties)
}

fn for_each_subset(n: usize, k: usize, start: usize, acc: u64, ranks: &[u64], f: &mut impl FnMut(u64)) {
    if k == 0 {
        f(acc);
        return;
    }
    for i in start..=(n - k) {
        for_each_subset(n, k - 1, i + 1, acc + ranks[i], ranks, f);
    }
}

/// Two-sided rank-sum p-value.
///
/// Exact enumeration of the rank-sum null when `|a| + |b| <= EXACT_LIMIT`,
/// otherwise the normal approximation with tie and continuity corrections.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let smallest = a.len().min(b.len());
    if smallest < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: smallest });
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_ranks(&pooled);
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let observed: u64 = ranks[..n1].iter().sum();

    if n <= EXACT_LIMIT {
        let (mut below, mut above, mut total) = (0u64, 0u64, 0u64);
        for_each_subset(n, n1, 0, 0, &ranks, &mut |w| {
            total += 1;
            below += u64::from(w <= observed);
            above += u64::from(w >= observed);
        });
        let tail = below.min(above) as f64 / total as f64;
        return Ok((2.0 * tail).min(1.0));
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = observed as f64 / 2.0 - n1f * (n1f + 1.0) / 2.0;
    let mu = n1f * n2f / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term);
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Probability that a value from `a` exceeds one from `b`, ties counting half.
pub fn a12(a: &[f64], b: &[f64]) -> f64 {
    let mut num2 = 0u64;
    for x in a {
        for y in b {
            num2 += if x > y {
                2
            } else if x == y {
                1
            } else {
                0
            };
        }
    }
    let den = 2 * (a.len() * b.len()) as u64;
    // evaluating the smaller side keeps a12(a,b) + a12(b,a) == 1 exactly
    if 2 * num2 <= den {
        num2 as f64 / den as f64
    } else {
        1.0 - (den - num2) as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn of(a12: f64) -> Self {
        let m = a12.max(1.0 - a12);
        if m >= 0.71 {
            EffectSize::Large
        } else if m >= 0.64 {
            EffectSize::Medium
        } else if m >= 0.56 {
            EffectSize::Small
        } else {
            EffectSize::Negligible
        }
    }
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectSize::Negligible => "negligible",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        })
    }
}

/// Outcome of comparing method A against method B (larger values better).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Better,
    Equivalent,
    Worse,
}

impl Verdict {
    pub fn classify(p_value: f64, a12: f64, alpha: f64) -> Self {
        if p_value >= alpha || a12 == 0.5 {
            Verdict::Equivalent
        } else if a12 > 0.5 {
            Verdict::Better
        } else {
            Verdict::Worse
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Better => "†",
            Verdict::Equivalent => "≈",
            Verdict::Worse => "‡",
        }
    }
}

/// Scott-Knott ranks, one per input group; rank 1 holds the largest means.
pub fn scott_knott(groups: &[RunSample], alpha: f64) -> Result<Vec<usize>, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    if let Some(g) = groups.iter().find(|g| g.values.len() < 2) {
        return Err(StatsError::TooFewSamples { needed: 2, got: g.values.len() });
    }
    let means: Vec<f64> = groups.iter().map(RunSample::mean).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| means[i]).collect();

    let total: usize = groups.iter().map(|g| g.values.len()).sum();
    let dof = (total - groups.len()) as f64;
    let sse: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let mse = sse / dof;
    let mean_size = total as f64 / groups.len() as f64;
    let mean_variance = mse / mean_size;

    let mut labels = vec![0usize; sorted.len()];
    let mut next_label = 0;
    split(&sorted, 0, sorted.len(), dof, mean_variance, alpha, &mut labels, &mut next_label);

    let mut ranks = vec![0; groups.len()];
    for (pos, &g) in order.iter().enumerate() {
        ranks[g] = labels[pos] + 1;
    }
    Ok(ranks)
}

/// Largest between-part sum of squares over contiguous two-way splits.
fn best_split(means: &[f64]) -> (usize, f64) {
    let k = means.len() as f64;
    let grand = means.iter().sum::<f64>() / k;
    let mut best = (1, f64::NEG_INFINITY);
    for cut in 1..means.len() {
        let (l, r) = means.split_at(cut);
        let ml = l.iter().sum::<f64>() / l.len() as f64;
        let mr = r.iter().sum::<f64>() / r.len() as f64;
        let b0 = l.len() as f64 * (ml - grand).powi(2) + r.len() as f64 * (mr - grand).powi(2);
        if b0 > best.1 {
            best = (cut, b0);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn split(
    means: &[f64],
    lo: usize,
    hi: usize,
    dof: f64,
    mean_variance: f64,
    alpha: f64,
    labels: &mut [usize],
    next_label: &mut usize,
) {
    let node = &means[lo..hi];
    let accept = node.len() >= 2 && {
        let (cut, b0) = best_split(node);
        let k = node.len() as f64;
        let grand = node.iter().sum::<f64>() / k;
        let spread: f64 = node.iter().map(|m| (m - grand).powi(2)).sum();
        let sigma2 = (spread + dof * mean_variance) / (k + dof);
        let significant = if b0 <= 0.0 {
            false
        } else if sigma2 <= 0.0 {
            true
        } else {
            let lambda = PI / (2.0 * (PI - 2.0)) * b0 / sigma2;
            let chi = ChiSquared::new(k / (PI - 2.0)).expect("positive degrees of freedom");
            lambda > chi.inverse_cdf(1.0 - alpha)
        };
        if significant {
            split(means, lo, lo + cut, dof, mean_variance, alpha, labels, next_label);
            split(means, lo + cut, hi, dof, mean_variance, alpha, labels, next_label);
        }
        significant
    };
    if !accept {
        for l in &mut labels[lo..hi] {
            *l = *next_label;
        }
        *next_label += 1;
    }
}
