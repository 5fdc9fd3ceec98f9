//! Upper-level multi-objective tabu search over pipeline structures.
//!
//! Phase 1 keeps an archive of at most `population` evaluated pipelines.
//! Every generation draws offspring by SBX + polynomial mutation (or a
//! uniform resample per gene), evaluates each offspring's non-tabu Hamming-1
//! neighbours, and reselects the archive by non-dominated sorting and
//! crowding distance. A pipeline stays tabu while it remains in the archive.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataspace::DatasetBundle;
use crate::ensemble::QRule;
use crate::learners::pipeline::{holdout_loss, PipelineSpec, TrainingData};
use crate::learners::{Configuration, LearnerError, STAGE_SIZES};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::tpe::{tpe_optimize, LowerBudget, TpeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("objective vectors differ in length ({expected} vs {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("lower-level loss {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid budgets: {0}")]
    InvalidBudgets(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Tpe(#[from] TpeError),
}

/// How a lower-level loss becomes the minimized upper-level objectives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMap {
    /// `(1 - AUC, 1 - sqrt(AUC))`.
    #[default]
    AucSqrt,
    /// `(1 - AUC)` alone.
    Auc,
}

impl ObjectiveMap {
    pub fn objectives(self, lower_loss: f64) -> Result<Vec<f64>, SearchError> {
        if !(0.0..=1.0).contains(&lower_loss) {
            return Err(SearchError::OutOfRange(lower_loss));
        }
        Ok(match self {
            ObjectiveMap::AucSqrt => vec![lower_loss, 1.0 - (1.0 - lower_loss).sqrt()],
            ObjectiveMap::Auc => vec![lower_loss],
        })
    }
}

pub fn objectives_from_loss(lower_loss: f64) -> Result<Vec<f64>, SearchError> {
    ObjectiveMap::default().objectives(lower_loss)
}

/// Population sizes, phase budgets and variation settings for one run.
///
/// Phase budgets count lower-level evaluations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunBudgets {
    pub population: usize,
    pub pool_capacity: usize,
    pub ensemble_size: usize,
    pub phase1_evaluations: usize,
    pub phase2_evaluations: usize,
    #[serde(default)]
    pub phase1_seconds: Option<f64>,
    #[serde(default)]
    pub phase2_seconds: Option<f64>,
    pub lower: LowerBudget,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    /// Probability of a uniform gene resample; `None` means `1 / 3`.
    #[serde(default)]
    pub mutation_prob: Option<f64>,
    pub mutation_eta: f64,
    pub objective_map: ObjectiveMap,
    pub q_rule: QRule,
}

impl Default for RunBudgets {
    fn default() -> Self {
        Self {
            population: 10,
            pool_capacity: 6,
            ensemble_size: 3,
            phase1_evaluations: 400,
            phase2_evaluations: 50,
            phase1_seconds: None,
            phase2_seconds: None,
            lower: LowerBudget::evaluations(10),
            crossover_prob: 1.0,
            crossover_eta: 30.0,
            mutation_prob: None,
            mutation_eta: 20.0,
            objective_map: ObjectiveMap::AucSqrt,
            q_rule: QRule::MaxQ,
        }
    }
}

impl RunBudgets {
    pub fn with_phase_evaluations(mut self, phase1: usize, phase2: usize) -> Self {
        self.phase1_evaluations = phase1;
        self.phase2_evaluations = phase2;
        self
    }

    pub fn with_lower_evaluations(mut self, n: usize) -> Self {
        self.lower.max_evaluations = n;
        self
    }

    pub fn with_population(mut self, n: usize) -> Self {
        self.population = n;
        self
    }

    pub fn mutation_threshold(&self) -> f64 {
        self.mutation_prob.unwrap_or(1.0 / STAGE_SIZES.len() as f64)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidBudgets(m.to_string()));
        if self.population == 0 || self.pool_capacity == 0 || self.ensemble_size == 0 {
            return bad("population, pool capacity and ensemble size must be positive");
        }
        if self.lower.max_evaluations == 0 {
            return bad("lower-level evaluations must be positive");
        }
        if self.population > STAGE_SIZES.iter().product() {
            return bad("population exceeds the number of distinct pipelines");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) || !self.mutation_threshold().is_finite() {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mutation_threshold()) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.crossover_eta < 0.0 || self.mutation_eta < 0.0 {
            return bad("distribution indices must be non-negative");
        }
        for s in [self.phase1_seconds, self.phase2_seconds, self.lower.max_seconds].into_iter().flatten() {
            if s.is_nan() || s <= 0.0 {
                return bad("time limits must be positive");
            }
        }
        Ok(())
    }
}

/// One pipeline after lower-level tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSolution {
    pub pipeline: PipelineSpec,
    pub best_config: Configuration,
    pub lower_loss: f64,
    pub objectives: Vec<f64>,
    pub history_len: usize,
    /// Loss of every lower-level trial, in evaluation order.
    pub trial_losses: Vec<f64>,
    /// Trials whose loss was substituted (unfittable training or one-class test).
    pub flagged_trials: usize,
    /// Position in the run's evaluation order.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub pipeline: PipelineSpec,
    pub was_tabu: bool,
    pub phase: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    BudgetExhaustedCleanly,
    TimeLimit,
    /// Many consecutive generations found only tabu neighbours.
    Stalled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub archive: Vec<EvaluatedSolution>,
    pub pool: Vec<EvaluatedSolution>,
    pub tabu: BTreeSet<PipelineSpec>,
    /// Every evaluation ever made, in order.
    pub evaluated: Vec<EvaluatedSolution>,
    pub log: Vec<EvaluationRecord>,
    pub evaluations_used: usize,
    /// Lower-level searches started so far; keys their random streams.
    pub lower_runs: usize,
    pub termination: Option<Termination>,
}

impl SearchState {
    pub fn archive(&self) -> &[EvaluatedSolution] {
        &self.archive
    }

    pub fn best(&self) -> Option<&EvaluatedSolution> {
        self.archive.iter().reduce(|b, s| if s.lower_loss < b.lower_loss { s } else { b })
    }
}

/// `a` dominates `b`: no worse anywhere and different somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a != b
}

/// Fronts of mutually non-dominated indices, best first, each ascending.
pub fn non_dominated_sort(points: &[Vec<f64>]) -> Result<Vec<Vec<usize>>, SearchError> {
    if let Some(first) = points.first() {
        if let Some(p) = points.iter().find(|p| p.len() != first.len()) {
            return Err(SearchError::DimensionMismatch { expected: first.len(), got: p.len() });
        }
    }
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    Ok(fronts)
}

/// Crowding distance of each point within one front.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..front[0].len() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]));
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = front[order[n - 1]][m] - front[order[0]][m];
        if range > 0.0 {
            for w in 1..n - 1 {
                dist[order[w]] += (front[order[w + 1]][m] - front[order[w - 1]][m]) / range;
            }
        }
    }
    dist
}

/// Indices of the `keep` best points by (front, -crowding, index).
pub fn environmental_select(points: &[Vec<f64>], keep: usize) -> Result<Vec<usize>, SearchError> {
    let fronts = non_dominated_sort(points)?;
    let mut keyed: Vec<(usize, f64, usize)> = Vec::with_capacity(points.len());
    for (rank, front) in fronts.iter().enumerate() {
        let members: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
        for (&i, c) in front.iter().zip(crowding_distance(&members)) {
            keyed.push((rank, c, i));
        }
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    Ok(keyed.into_iter().take(keep).map(|(_, _, i)| i).collect())
}

fn select_solutions(solutions: Vec<EvaluatedSolution>, keep: usize) -> Result<Vec<EvaluatedSolution>, SearchError> {
    if solutions.len() <= keep {
        return Ok(solutions);
    }
    let points: Vec<Vec<f64>> = solutions.iter().map(|s| s.objectives.clone()).collect();
    let chosen = environmental_select(&points, keep)?;
    let mut slots: Vec<Option<EvaluatedSolution>> = solutions.into_iter().map(Some).collect();
    Ok(chosen.into_iter().map(|i| slots[i].take().expect("index chosen once")).collect())
}

/// Random draws consumed by one gene of one offspring.
#[derive(Clone, Copy, Debug)]
pub struct GeneDraws {
    pub r1: f64,
    pub r2: f64,
    pub crossover: f64,
    pub u_sbx: f64,
    pub u_pm: f64,
}

/// SBX spread factor for uniform draw `u`.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    }
}

/// Polynomial mutation perturbation in `[-1, 1]` for uniform draw `u`.
pub fn pm_delta(u: f64, eta: f64) -> f64 {
    if u < 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0))
    }
}

/// Child gene in `[0, size - 1]` from parent genes `xi`, `xj`.
pub fn vary_gene(xi: usize, xj: usize, size: usize, draws: GeneDraws, budgets: &RunBudgets) -> usize {
    let upper = (size - 1) as f64;
    let value = if draws.r1 > budgets.mutation_threshold() {
        let (a, b) = (xi as f64, xj as f64);
        let alpha = if draws.crossover <= budgets.crossover_prob {
            let beta = sbx_beta(draws.u_sbx, budgets.crossover_eta);
            0.5 * ((1.0 + beta) * a + (1.0 - beta) * b)
        } else {
            a
        };
        alpha + pm_delta(draws.u_pm, budgets.mutation_eta) * upper
    } else {
        // widened by half a step each side so rounding is uniform over indices
        -0.5 + draws.r2 * size as f64
    };
    value.round().clamp(0.0, upper) as usize
}

/// `population` offspring from parents drawn uniformly out of `parents`.
pub fn vary(parents: &[PipelineSpec], budgets: &RunBudgets, rng: &mut StreamRng) -> Vec<PipelineSpec> {
    let genes: Vec<[usize; 3]> = parents.iter().filter_map(|p| p.encode()).collect();
    assert!(!genes.is_empty(), "vary needs at least one single-classifier parent");
    (0..budgets.population)
        .map(|_| {
            let pi = genes[rng.random_range(0..genes.len())];
            let pj = genes[rng.random_range(0..genes.len())];
            let mut child = [0; 3];
            for g in 0..3 {
                let draws = GeneDraws {
                    r1: rng.random(),
                    r2: rng.random(),
                    crossover: rng.random(),
                    u_sbx: rng.random(),
                    u_pm: rng.random(),
                };
                child[g] = vary_gene(pi[g], pj[g], STAGE_SIZES[g], draws, budgets);
            }
            PipelineSpec::decode(child).expect("genes clamped to registry")
        })
        .collect()
}

/// Pipelines differing from `p` in exactly one stage.
pub fn neighbors(p: &PipelineSpec) -> Vec<PipelineSpec> {
    let Some(genes) = p.encode() else { return Vec::new() };
    let mut out = Vec::new();
    for g in 0..3 {
        for v in 0..STAGE_SIZES[g] {
            if v != genes[g] {
                let mut q = genes;
                q[g] = v;
                out.push(PipelineSpec::decode(q).expect("index within registry"));
            }
        }
    }
    out
}

/// Shared read-only inputs for lower-level evaluations.
pub struct Evaluator<'a> {
    pub bundle: &'a DatasetBundle,
    pub budgets: &'a RunBudgets,
    pub seed: u64,
    pub training: TrainingData,
}

impl<'a> Evaluator<'a> {
    pub fn new(bundle: &'a DatasetBundle, budgets: &'a RunBudgets, seed: u64) -> Self {
        Self { bundle, budgets, seed, training: TrainingData::from_bundle(bundle) }
    }

    /// Tunes `spec` with `evaluations` TPE trials. Seeds depend only on `index`.
    pub fn lower_level(&self, spec: &PipelineSpec, evaluations: usize, index: usize) -> Result<EvaluatedSolution, SearchError> {
        let space = spec.resolved_space(self.bundle);
        let fit_seed = derive_seed(self.seed, "fit", index as u64);
        let mut flagged = 0;
        let objective = |cfg: &Configuration| match holdout_loss(spec, cfg, self.bundle, fit_seed) {
            Ok(h) => {
                flagged += usize::from(h.flag.is_some());
                h.loss
            }
            Err(_) => {
                flagged += 1;
                1.0
            }
        };
        let budget = LowerBudget { max_evaluations: evaluations, max_seconds: self.budgets.lower.max_seconds };
        let history = tpe_optimize(&space, objective, budget, derive_seed(self.seed, "lower", index as u64))?;
        let best = history.best().expect("budget is positive");
        Ok(EvaluatedSolution {
            pipeline: spec.clone(),
            best_config: best.config.clone(),
            lower_loss: best.loss,
            objectives: self.budgets.objective_map.objectives(best.loss)?,
            history_len: history.trials.len(),
            trial_losses: history.trials.iter().map(|t| t.loss).collect(),
            flagged_trials: flagged,
            index,
        })
    }
}

/// Records a finished evaluation: archive, pool (trimmed), tabu list, log.
pub fn apply_evaluation(state: &mut SearchState, sol: EvaluatedSolution, budgets: &RunBudgets, phase: u8) -> Result<(), SearchError> {
    state.evaluations_used += sol.history_len;
    state.lower_runs = state.lower_runs.max(sol.index + 1);
    state.log.push(EvaluationRecord { pipeline: sol.pipeline.clone(), was_tabu: state.tabu.contains(&sol.pipeline), phase });
    state.tabu.insert(sol.pipeline.clone());
    state.archive.push(sol.clone());
    state.evaluated.push(sol.clone());
    match state.pool.iter().position(|p| p.pipeline == sol.pipeline) {
        Some(i) if state.pool[i].lower_loss <= sol.lower_loss => {}
        Some(i) => state.pool[i] = sol,
        None => state.pool.push(sol),
    }
    if state.pool.len() > budgets.pool_capacity {
        state.pool = select_solutions(std::mem::take(&mut state.pool), budgets.pool_capacity)?;
    }
    Ok(())
}

/// Evaluates `p` unless it is tabu or the budget up to `limit` is spent.
///
/// Returns whether an evaluation took place.
pub fn upper_evaluate(
    p: &PipelineSpec,
    state: &mut SearchState,
    ev: &Evaluator<'_>,
    limit: usize,
    phase: u8,
) -> Result<bool, SearchError> {
    let remaining = limit.saturating_sub(state.evaluations_used);
    if state.tabu.contains(p) || remaining == 0 {
        return Ok(false);
    }
    let sol = ev.lower_level(p, ev.budgets.lower.max_evaluations.min(remaining), state.lower_runs)?;
    apply_evaluation(state, sol, ev.budgets, phase)?;
    Ok(true)
}

/// Evaluates a batch concurrently with budgets and seeds fixed up front, then
/// applies results in submission order.
fn evaluate_batch(
    batch: &[PipelineSpec],
    state: &mut SearchState,
    ev: &Evaluator<'_>,
    limit: Option<usize>,
    phase: u8,
) -> Result<usize, SearchError> {
    let mut seen = BTreeSet::new();
    let mut jobs = Vec::new();
    let mut remaining = limit.map(|l| l.saturating_sub(state.evaluations_used));
    for p in batch {
        if state.tabu.contains(p) || !seen.insert(p.clone()) {
            continue;
        }
        let n = match remaining {
            Some(0) => break,
            Some(r) => ev.budgets.lower.max_evaluations.min(r),
            None => ev.budgets.lower.max_evaluations,
        };
        if let Some(r) = remaining.as_mut() {
            *r -= n;
        }
        jobs.push((p.clone(), n, state.lower_runs + jobs.len()));
    }
    let results: Vec<Result<EvaluatedSolution, SearchError>> =
        jobs.par_iter().map(|(p, n, idx)| ev.lower_level(p, *n, *idx)).collect();
    let count = results.len();
    for r in results {
        apply_evaluation(state, r?, ev.budgets, phase)?;
    }
    Ok(count)
}

/// Keeps `population` archive members and drops tabu entries outside it.
pub fn reselect_archive(state: &mut SearchState, budgets: &RunBudgets) -> Result<(), SearchError> {
    state.archive = select_solutions(std::mem::take(&mut state.archive), budgets.population)?;
    let kept: BTreeSet<PipelineSpec> = state.archive.iter().map(|s| s.pipeline.clone()).collect();
    state.tabu.retain(|p| kept.contains(p));
    Ok(())
}

const MAX_IDLE_GENERATIONS: usize = 1000;

/// Phase 1: initial population, then generations until the budget is spent.
///
/// The initial population is always evaluated in full, even when that
/// overruns `phase1_evaluations`.
pub fn phase1_search(bundle: &DatasetBundle, budgets: &RunBudgets, seed: u64) -> Result<SearchState, SearchError> {
    budgets.validate()?;
    let ev = Evaluator::new(bundle, budgets, seed);
    let mut state = SearchState::default();
    run_phase1(&mut state, &ev)?;
    Ok(state)
}

pub fn run_phase1(state: &mut SearchState, ev: &Evaluator<'_>) -> Result<(), SearchError> {
    let budgets = ev.budgets;
    let started = Instant::now();
    let deadline = budgets.phase1_seconds.map(Duration::from_secs_f64);
    let mut rng = stream(ev.seed, "upper", 0);

    let all = PipelineSpec::all_single();
    let initial: Vec<PipelineSpec> =
        sample(&mut rng, all.len(), budgets.population).into_iter().map(|i| all[i].clone()).collect();
    evaluate_batch(&initial, state, ev, None, 1)?;
    reselect_archive(state, budgets)?;

    let limit = budgets.phase1_evaluations;
    let mut idle = 0;
    'generations: while state.evaluations_used < limit {
        if deadline.is_some_and(|d| started.elapsed() >= d) {
            state.termination = Some(Termination::TimeLimit);
            return Ok(());
        }
        let parents: Vec<PipelineSpec> = state.archive.iter().map(|s| s.pipeline.clone()).collect();
        let offspring = vary(&parents, budgets, &mut rng);
        let mut progressed = false;
        for child in offspring {
            let done = evaluate_batch(&neighbors(&child), state, ev, Some(limit), 1)?;
            progressed |= done > 0;
            reselect_archive(state, budgets)?;
            if state.evaluations_used >= limit {
                break 'generations;
            }
        }
        idle = if progressed { 0 } else { idle + 1 };
        if idle >= MAX_IDLE_GENERATIONS {
            state.termination = Some(Termination::Stalled);
            return Ok(());
        }
    }
    state.termination = Some(Termination::BudgetExhaustedCleanly);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{make_bundle, synth_cpdp, zscore_fit_apply};
    use crate::learners::{ClassifierKind, FeatureSelector, TransferLearner};
    use proptest::prelude::*;

    fn brute_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut left: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !left.is_empty() {
            let front: Vec<usize> = left
                .iter()
                .copied()
                .filter(|&i| !left.iter().any(|&j| dominates(&points[j], &points[i])))
                .collect();
            left.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn objective_map_examples() {
        assert_eq!(objectives_from_loss(0.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(objectives_from_loss(0.75).unwrap(), vec![0.75, 0.5]);
        assert_eq!(objectives_from_loss(1.5), Err(SearchError::OutOfRange(1.5)));
        assert_eq!(ObjectiveMap::Auc.objectives(0.2).unwrap(), vec![0.2]);
    }

    #[test]
    fn sorting_examples() {
        assert_eq!(non_dominated_sort(&[vec![1.0, 2.0]]).unwrap(), vec![vec![0]]);
        let pts = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(non_dominated_sort(&pts).unwrap(), vec![vec![0, 1], vec![2]]);
        let chain = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert_eq!(non_dominated_sort(&chain).unwrap(), vec![vec![0], vec![1], vec![2]]);
        assert!(matches!(non_dominated_sort(&[vec![1.0], vec![1.0, 2.0]]), Err(SearchError::DimensionMismatch { .. })));
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding_distance(&[vec![0.0, 1.0], vec![1.0, 0.0]]), vec![f64::INFINITY; 2]);
        let d = crowding_distance(&[vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]]);
        assert_eq!(d, vec![f64::INFINITY, 2.0, f64::INFINITY]);
        let same = crowding_distance(&vec![vec![1.0, 1.0]; 4]);
        assert_eq!(same.iter().filter(|d| **d == 0.0).count(), 2);
    }

    #[test]
    fn neighbourhood() {
        let p = PipelineSpec::single(FeatureSelector::HfVar, TransferLearner::None, ClassifierKind::Lr);
        let n = neighbors(&p);
        assert_eq!(n.len(), 7);
        assert!(!n.contains(&p));
        for q in &n {
            assert!(neighbors(q).contains(&p));
        }
    }

    #[test]
    fn identical_parents_without_mutation_copy_gene() {
        let budgets = RunBudgets::default();
        for x in 0..5 {
            let draws = GeneDraws { r1: 0.9, r2: 0.1, crossover: 0.0, u_sbx: 0.83, u_pm: 0.5 };
            assert_eq!(vary_gene(x, x, 5, draws, &budgets), x);
        }
    }

    #[test]
    fn resample_branch_is_uniform() {
        let budgets = RunBudgets::default();
        let mut rng = stream(11, "test", 0);
        let mut counts = [0usize; 5];
        for _ in 0..5000 {
            let draws = GeneDraws { r1: 0.0, r2: rand::Rng::random(&mut rng), crossover: 0.0, u_sbx: 0.5, u_pm: 0.5 };
            counts[vary_gene(2, 2, 5, draws, &budgets)] += 1;
        }
        let expected = 1000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - statrs::distribution::ContinuousCDF::cdf(&statrs::distribution::ChiSquared::new(4.0).unwrap(), chi2);
        assert!(p > 0.01, "{counts:?}");
    }

    fn small_bundle(seed: u64) -> DatasetBundle {
        zscore_fit_apply(&make_bundle(&synth_cpdp(2, 80, 5, 1.0, seed).unwrap(), "target", 0.9, seed).unwrap())
    }

    #[test]
    fn upper_evaluate_contract() {
        let bundle = small_bundle(1);
        let budgets = RunBudgets::default().with_lower_evaluations(2);
        let ev = Evaluator::new(&bundle, &budgets, 0);
        let mut state = SearchState::default();
        let all = PipelineSpec::all_single();
        assert!(upper_evaluate(&all[0], &mut state, &ev, usize::MAX, 1).unwrap());
        assert_eq!((state.archive.len(), state.pool.len(), state.tabu.len()), (1, 1, 1));
        let used = state.evaluations_used;
        assert!(!upper_evaluate(&all[0], &mut state, &ev, usize::MAX, 1).unwrap());
        assert_eq!(state.evaluations_used, used);
        for p in &all[1..=budgets.pool_capacity] {
            upper_evaluate(p, &mut state, &ev, usize::MAX, 1).unwrap();
        }
        assert_eq!(state.pool.len(), budgets.pool_capacity);
        assert_eq!(state.archive.len(), budgets.pool_capacity + 1);
    }

    #[test]
    fn initial_population_only() {
        let bundle = small_bundle(2);
        let budgets = RunBudgets::default().with_lower_evaluations(1).with_phase_evaluations(10, 0);
        let state = phase1_search(&bundle, &budgets, 3).unwrap();
        assert_eq!(state.evaluated.len(), 10);
        let mut a: Vec<_> = state.archive.iter().map(|s| s.pipeline.clone()).collect();
        let mut e: Vec<_> = state.evaluated.iter().map(|s| s.pipeline.clone()).collect();
        a.sort();
        e.sort();
        assert_eq!(a, e);
        assert_eq!(state.termination, Some(Termination::BudgetExhaustedCleanly));
    }

    #[test]
    fn phase1_invariants_and_determinism() {
        let bundle = small_bundle(3);
        let budgets = RunBudgets::default().with_lower_evaluations(2).with_phase_evaluations(60, 0);
        let state = phase1_search(&bundle, &budgets, 5).unwrap();
        assert!(state.evaluations_used >= 60);
        assert!(state.archive.len() <= budgets.population);
        assert!(state.log.iter().all(|r| !r.was_tabu));
        for s in &state.evaluated {
            assert_eq!(s.lower_loss, s.trial_losses.iter().copied().fold(f64::INFINITY, f64::min));
            assert!((s.objectives[1] - (1.0 - (1.0 - s.objectives[0]).sqrt())).abs() < 1e-12);
        }
        let pts: Vec<Vec<f64>> = state.archive.iter().map(|s| s.objectives.clone()).collect();
        let first = &non_dominated_sort(&pts).unwrap()[0];
        for &i in first {
            for &j in first {
                assert!(!dominates(&pts[i], &pts[j]));
            }
        }
        let again = phase1_search(&bundle, &budgets, 5).unwrap();
        assert_eq!(serde_json::to_string(&state).unwrap(), serde_json::to_string(&again).unwrap());
    }

    fn point_sets() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop_oneof![Just(2usize), Just(3), Just(5)].prop_flat_map(|m| {
            proptest::collection::vec(proptest::collection::vec((0u8..6).prop_map(f64::from), m), 1..50)
        })
    }

    proptest! {
        #[test]
        fn nds_matches_brute_force(points in point_sets()) {
            prop_assert_eq!(non_dominated_sort(&points).unwrap(), brute_fronts(&points));
        }

        #[test]
        fn offspring_within_registry(seed in any::<u64>()) {
            let mut rng = stream(seed, "test", 0);
            let parents = PipelineSpec::all_single();
            for child in vary(&parents[..4], &RunBudgets::default(), &mut rng) {
                prop_assert!(child.encode().is_some());
            }
        }

        #[test]
        fn default_map_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assume!(a != b);
            let (hi, lo) = if a > b { (a, b) } else { (b, a) };
            prop_assert!(dominates(&objectives_from_loss(1.0 - hi).unwrap(), &objectives_from_loss(1.0 - lo).unwrap()));
        }
    }
}
