//! Tree-structured Parzen Estimator for flat mixed parameter spaces.
//!
//! The search starts with a Latin-hypercube design, then repeatedly splits
//! the history at the `GAMMA` loss quantile into good and bad trials, fits a
//! per-dimension Parzen density to each, and evaluates the candidate drawn
//! from the good density that maximizes the density ratio.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::learners::params::{Configuration, ParamValue, ResolvedDomain, ResolvedParam, SearchSpace};
use crate::rng::{stream, StreamRng};

pub const GAMMA: f64 = 0.25;
pub const MIN_GOOD: usize = 2;
pub const N_CANDIDATES: usize = 24;
/// Bandwidths never shrink below this fraction of a dimension's range.
pub const MIN_BANDWIDTH_FRACTION: f64 = 1.0 / 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TpeError {
    #[error("lower-level budget allows no evaluations")]
    BudgetZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBudget {
    pub max_evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
}

impl LowerBudget {
    pub fn evaluations(n: usize) -> Self {
        Self { max_evaluations: n, max_seconds: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: Configuration,
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialHistory {
    pub trials: Vec<Trial>,
    pub budget_used: usize,
}

impl TrialHistory {
    /// Lowest-loss trial; the earliest one on ties.
    pub fn best(&self) -> Option<&Trial> {
        self.trials.iter().reduce(|best, t| if t.loss < best.loss { t } else { best })
    }

    /// Best loss seen after each trial.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::INFINITY, |b, t| {
                *b = b.min(t.loss);
                Some(*b)
            })
            .collect()
    }

    fn push(&mut self, config: Configuration, loss: f64) {
        let loss = if loss.is_finite() { loss } else { 1.0 };
        self.trials.push(Trial { config, loss });
        self.budget_used += 1;
    }
}

/// Maps `u` in `[0, 1)` onto a parameter's domain.
fn value_at(param: &ResolvedParam, u: f64) -> ParamValue {
    match &param.domain {
        ResolvedDomain::Real { lo, hi } => ParamValue::Real((lo + u * (hi - lo)).clamp(*lo, *hi)),
        ResolvedDomain::Integer { lo, hi } => {
            let x = (*lo as f64 - 0.5) + u * ((hi - lo + 1) as f64);
            ParamValue::Int((x.round() as i64).clamp(*lo, *hi))
        }
        ResolvedDomain::Categorical(c) => {
            ParamValue::Choice(c[((u * c.len() as f64).floor() as usize).min(c.len() - 1)].clone())
        }
    }
}

fn sample_uniform_with(space: &SearchSpace, rng: &mut StreamRng) -> Configuration {
    let mut cfg = Configuration::new();
    for p in &space.params {
        let v = match &p.domain {
            ResolvedDomain::Integer { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            ResolvedDomain::Real { lo, hi } => ParamValue::Real(if lo < hi { rng.random_range(*lo..*hi) } else { *lo }),
            ResolvedDomain::Categorical(c) => ParamValue::Choice(c[rng.random_range(0..c.len())].clone()),
        };
        cfg.set(&p.name, v);
    }
    cfg
}

/// One configuration drawn uniformly from every dimension.
pub fn sample_uniform(space: &SearchSpace, seed: u64) -> Configuration {
    sample_uniform_with(space, &mut stream(seed, "uniform", 0))
}

/// `n` configurations, stratified per dimension with random pairing.
pub fn latin_hypercube(space: &SearchSpace, n: usize, rng: &mut StreamRng) -> Vec<Configuration> {
    let mut configs = vec![Configuration::new(); n];
    for p in &space.params {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (cfg, s) in configs.iter_mut().zip(strata) {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            cfg.set(&p.name, value_at(p, u));
        }
    }
    configs
}

pub fn initial_design_size(budget: usize) -> usize {
    5usize.max(budget.div_ceil(5)).min(budget)
}

/// Truncated-Gaussian mixture over `[lo, hi]`.
struct NumericParzen {
    lo: f64,
    hi: f64,
    sigma: f64,
    kernels: Vec<(f64, f64)>,
}

impl NumericParzen {
    fn new(points: &[f64], lo: f64, hi: f64) -> Self {
        let range = hi - lo;
        let sigma = (range / points.len() as f64).max(range * MIN_BANDWIDTH_FRACTION);
        let kernels = points
            .iter()
            .map(|&mu| {
                let n = Normal::new(mu, sigma).expect("positive bandwidth");
                (mu, (n.cdf(hi) - n.cdf(lo)).max(1e-300))
            })
            .collect();
        Self { lo, hi, sigma, kernels }
    }

    fn log_density(&self, x: f64) -> f64 {
        let total: f64 = self
            .kernels
            .iter()
            .map(|&(mu, mass)| Normal::new(mu, self.sigma).expect("positive bandwidth").pdf(x) / mass)
            .sum();
        (total / self.kernels.len() as f64).max(1e-300).ln()
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        let (mu, _) = self.kernels[rng.random_range(0..self.kernels.len())];
        let n = Normal::new(mu, self.sigma).expect("positive bandwidth");
        let a = n.cdf(self.lo);
        let b = n.cdf(self.hi);
        let u = a + rng.random::<f64>() * (b - a);
        let x = if b - a > 1e-12 { n.inverse_cdf(u) } else { mu };
        if x.is_finite() {
            x.clamp(self.lo, self.hi)
        } else {
            mu.clamp(self.lo, self.hi)
        }
    }
}

enum Parzen {
    Numeric { integer: bool, density: NumericParzen },
    Categorical { choices: Vec<String>, log_weights: Vec<f64> },
    Constant(ParamValue),
}

fn numeric_of(v: &ParamValue) -> f64 {
    match v {
        ParamValue::Int(i) => *i as f64,
        ParamValue::Real(r) => *r,
        ParamValue::Choice(_) => unreachable!("numeric dimension holds a choice"),
    }
}

impl Parzen {
    fn fit(param: &ResolvedParam, observed: &[&Configuration]) -> Self {
        let values = observed.iter().map(|c| c.get(&param.name).expect("trial covers space"));
        match &param.domain {
            ResolvedDomain::Integer { lo, hi } if lo == hi => Parzen::Constant(ParamValue::Int(*lo)),
            ResolvedDomain::Real { lo, hi } if lo == hi => Parzen::Constant(ParamValue::Real(*lo)),
            ResolvedDomain::Integer { lo, hi } => Parzen::Numeric {
                integer: true,
                density: NumericParzen::new(&values.map(numeric_of).collect::<Vec<_>>(), *lo as f64 - 0.5, *hi as f64 + 0.5),
            },
            ResolvedDomain::Real { lo, hi } => Parzen::Numeric {
                integer: false,
                density: NumericParzen::new(&values.map(numeric_of).collect::<Vec<_>>(), *lo, *hi),
            },
            ResolvedDomain::Categorical(choices) => {
                let mut counts = vec![1.0; choices.len()];
                for v in values {
                    if let ParamValue::Choice(c) = v {
                        if let Some(i) = choices.iter().position(|x| x == c) {
                            counts[i] += 1.0;
                        }
                    }
                }
                let total = observed.len() as f64 + choices.len() as f64;
                Parzen::Categorical { choices: choices.clone(), log_weights: counts.iter().map(|c| (c / total).ln()).collect() }
            }
        }
    }

    fn sample(&self, param: &ResolvedParam, rng: &mut StreamRng) -> ParamValue {
        match self {
            Parzen::Constant(v) => v.clone(),
            Parzen::Numeric { integer: false, density } => ParamValue::Real(density.sample(rng)),
            Parzen::Numeric { integer: true, density } => {
                let ResolvedDomain::Integer { lo, hi } = param.domain else { unreachable!() };
                ParamValue::Int((density.sample(rng).round() as i64).clamp(lo, hi))
            }
            Parzen::Categorical { choices, log_weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, lw) in choices.iter().zip(log_weights) {
                    acc += lw.exp();
                    if u < acc {
                        return ParamValue::Choice(c.clone());
                    }
                }
                ParamValue::Choice(choices[choices.len() - 1].clone())
            }
        }
    }

    fn log_density(&self, v: &ParamValue) -> f64 {
        match self {
            Parzen::Constant(_) => 0.0,
            Parzen::Numeric { density, .. } => density.log_density(numeric_of(v)),
            Parzen::Categorical { choices, log_weights } => match v {
                ParamValue::Choice(c) => choices.iter().position(|x| x == c).map_or(f64::NEG_INFINITY, |i| log_weights[i]),
                _ => f64::NEG_INFINITY,
            },
        }
    }
}

/// Splits trial indices into good and bad sets by loss (stable on ties).
pub fn split_good_bad(losses: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let n_good = MIN_GOOD.max((GAMMA * losses.len() as f64).ceil() as usize).min(losses.len().saturating_sub(1));
    let bad = order.split_off(n_good);
    (order, bad)
}

fn propose(space: &SearchSpace, history: &TrialHistory, rng: &mut StreamRng) -> Configuration {
    let losses: Vec<f64> = history.trials.iter().map(|t| t.loss).collect();
    let (good, bad) = split_good_bad(&losses);
    let pick = |idx: &[usize]| idx.iter().map(|&i| &history.trials[i].config).collect::<Vec<_>>();
    let (good, bad) = (pick(&good), pick(&bad));
    let models: Vec<(Parzen, Parzen)> =
        space.params.iter().map(|p| (Parzen::fit(p, &good), Parzen::fit(p, &bad))).collect();

    let mut best: Option<(f64, Configuration)> = None;
    for _ in 0..N_CANDIDATES {
        let mut cfg = Configuration::new();
        let mut score = 0.0;
        for (p, (l, g)) in space.params.iter().zip(&models) {
            let v = l.sample(p, rng);
            score += l.log_density(&v) - g.log_density(&v);
            cfg.set(&p.name, v);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cfg));
        }
    }
    best.expect("at least one candidate").1
}

/// Minimizes `objective` over `space` within `budget`.
pub fn tpe_optimize<F>(space: &SearchSpace, mut objective: F, budget: LowerBudget, seed: u64) -> Result<TrialHistory, TpeError>
where
    F: FnMut(&Configuration) -> f64,
{
    if budget.max_evaluations == 0 {
        return Err(TpeError::BudgetZero);
    }
    let started = Instant::now();
    let deadline = budget.max_seconds.map(Duration::from_secs_f64);
    let out_of_time = || deadline.is_some_and(|d| started.elapsed() >= d);

    let mut rng = stream(seed, "tpe", 0);
    let mut history = TrialHistory::default();
    let n_init = initial_design_size(budget.max_evaluations);
    for cfg in latin_hypercube(space, n_init, &mut rng) {
        if !history.trials.is_empty() && out_of_time() {
            return Ok(history);
        }
        let loss = objective(&cfg);
        history.push(cfg, loss);
    }
    while history.budget_used < budget.max_evaluations && !out_of_time() {
        let cfg = propose(space, &history, &mut rng);
        let loss = objective(&cfg);
        history.push(cfg, loss);
    }
    Ok(history)
}

/// Pure random search with the same budget, for comparisons.
pub fn random_search<F>(space: &SearchSpace, mut objective: F, evaluations: usize, seed: u64) -> TrialHistory
where
    F: FnMut(&Configuration) -> f64,
{
    let mut rng = stream(seed, "random-search", 0);
    let mut history = TrialHistory::default();
    for _ in 0..evaluations {
        let cfg = sample_uniform_with(space, &mut rng);
        let loss = objective(&cfg);
        history.push(cfg, loss);
    }
    history
}
