//! Phase 2: stacking ensembles assembled from the candidate pool.
//!
//! Validation always happens on out-of-fold scores over the target training
//! rows; the target test rows stay reserved for the lower-level loss.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::logistic::LogisticModel;
use crate::learners::pipeline::{columns_to_matrix, meta_params, oof_target_scores, ClassifierSpec, PipelineSpec};
use crate::learners::{stratified_folds, ClassifierKind, Configuration, FeatureSelector, TransferLearner};
use crate::metrics::auc_or_half;
use crate::rng::derive_seed;
use crate::search::{reselect_archive, upper_evaluate, EvaluatedSolution, Evaluator, SearchError, SearchState, Termination};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot prune a single-member ensemble")]
    SingletonEnsemble,
    #[error("no candidates to select from")]
    EmptyPool,
    #[error(transparent)]
    Search(#[from] SearchError),
}

impl From<crate::learners::LearnerError> for EnsembleError {
    fn from(e: crate::learners::LearnerError) -> Self {
        EnsembleError::Search(e.into())
    }
}

/// Which pair the diversity scan picks when too many classifiers compete.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QRule {
    /// Largest Q, i.e. the most similar pair.
    #[default]
    MaxQ,
    /// Q closest to zero.
    MinAbsQ,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QValue {
    pub q: f64,
    /// The denominator vanished and `q` was set to 0.
    pub degenerate: bool,
}

/// Yule's Q over two correctness vectors.
pub fn q_statistic(a: &[bool], b: &[bool]) -> Result<QValue, EnsembleError> {
    if a.len() != b.len() {
        return Err(EnsembleError::LengthMismatch(a.len(), b.len()));
    }
    let (mut n11, mut n00, mut n10, mut n01) = (0u64, 0u64, 0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        match (x, y) {
            (true, true) => n11 += 1,
            (false, false) => n00 += 1,
            (true, false) => n10 += 1,
            (false, true) => n01 += 1,
        }
    }
    let agree = (n11 * n00) as f64;
    let disagree = (n01 * n10) as f64;
    let den = agree + disagree;
    Ok(if den == 0.0 { QValue { q: 0.0, degenerate: true } } else { QValue { q: (agree - disagree) / den, degenerate: false } })
}

/// Whether each thresholded score matches its label.
pub fn correctness(labels: &[u8], scores: &[f64]) -> Vec<bool> {
    labels.iter().zip(scores).map(|(&l, &s)| (s >= 0.5) == (l == 1)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoolPick {
    pub candidate: usize,
    pub picks: usize,
    pub auc: f64,
}

/// Greedy forward selection with replacement on the mean-score AUC.
///
/// Returns the distinct picked candidates ranked by pick count, then
/// standalone AUC, then index.
pub fn greedy_select(scores: &[Vec<f64>], labels: &[u8], capacity: usize) -> Result<Vec<PoolPick>, EnsembleError> {
    if scores.is_empty() {
        return Err(EnsembleError::EmptyPool);
    }
    let mut sum = vec![0.0; labels.len()];
    let mut picks = vec![0usize; scores.len()];
    for step in 0..capacity {
        let mut best: Option<(f64, usize)> = None;
        for (c, s) in scores.iter().enumerate() {
            let mean: Vec<f64> = sum.iter().zip(s).map(|(a, b)| (a + b) / (step + 1) as f64).collect();
            let (auc, _) = auc_or_half(labels, &mean);
            if best.is_none_or(|(b, _)| auc > b) {
                best = Some((auc, c));
            }
        }
        let (_, c) = best.expect("non-empty candidates");
        picks[c] += 1;
        for (a, b) in sum.iter_mut().zip(&scores[c]) {
            *a += b;
        }
    }
    let mut out: Vec<PoolPick> = picks
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0)
        .map(|(c, &p)| PoolPick { candidate: c, picks: p, auc: auc_or_half(labels, &scores[c]).0 })
        .collect();
    out.sort_by(|a, b| b.picks.cmp(&a.picks).then(b.auc.total_cmp(&a.auc)).then(a.candidate.cmp(&b.candidate)));
    Ok(out)
}

/// Shared phase-2 caches: tuned single pipelines and their validation scores.
pub struct Phase2Memo {
    tuned: BTreeMap<PipelineSpec, EvaluatedSolution>,
    validation: BTreeMap<PipelineSpec, Vec<f64>>,
}

impl Phase2Memo {
    pub fn new(state: &SearchState) -> Self {
        let mut tuned = BTreeMap::new();
        for s in &state.evaluated {
            let keep = tuned.get(&s.pipeline).is_none_or(|t: &EvaluatedSolution| s.lower_loss < t.lower_loss);
            if keep {
                tuned.insert(s.pipeline.clone(), s.clone());
            }
        }
        Self { tuned, validation: BTreeMap::new() }
    }

    /// Out-of-fold target-train scores for a tuned pipeline.
    pub fn validation_scores(&mut self, sol: &EvaluatedSolution, ev: &Evaluator<'_>) -> Result<Vec<f64>, EnsembleError> {
        if let Some(v) = self.validation.get(&sol.pipeline) {
            return Ok(v.clone());
        }
        let v = oof_target_scores(&sol.pipeline, &sol.best_config, &ev.training, derive_seed(ev.seed, "validation", 0))?;
        self.validation.insert(sol.pipeline.clone(), v.clone());
        Ok(v)
    }
}

/// Greedy selection over `evaluated`, returning the chosen solutions in rank order.
pub fn greedy_pool_select(
    evaluated: &[EvaluatedSolution],
    capacity: usize,
    memo: &mut Phase2Memo,
    ev: &Evaluator<'_>,
) -> Result<Vec<EvaluatedSolution>, EnsembleError> {
    let scores = evaluated.iter().map(|s| memo.validation_scores(s, ev)).collect::<Result<Vec<_>, _>>()?;
    let picks = greedy_select(&scores, &ev.training.target_y, capacity)?;
    let mut pool: Vec<EvaluatedSolution> = Vec::new();
    for p in picks {
        let s = &evaluated[p.candidate];
        if !pool.iter().any(|q| q.pipeline == s.pipeline) {
            pool.push(s.clone());
        }
    }
    Ok(pool)
}

/// Output of one construction step.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstructedEnsemble {
    pub fs: FeatureSelector,
    pub tl: TransferLearner,
    /// Admitted classifiers, in admission order.
    pub members: Vec<ClassifierKind>,
    /// Standalone loss of every distinct candidate classifier under `(fs, tl)`.
    pub losses: Vec<(ClassifierKind, f64)>,
}

impl ConstructedEnsemble {
    pub fn pipeline(&self) -> PipelineSpec {
        let clf = if self.members.len() == 1 {
            ClassifierSpec::Single(self.members[0])
        } else {
            ClassifierSpec::Ensemble(self.members.clone())
        };
        PipelineSpec { fs: self.fs, tl: self.tl, clf }
    }

    pub fn loss_of(&self, kind: ClassifierKind) -> f64 {
        self.losses.iter().find(|(k, _)| *k == kind).map_or(1.0, |(_, l)| *l)
    }
}

/// Chooses up to `size` classifiers: the best `size / 2` by loss, then
/// repeatedly the better member of the remaining pair picked by `rule`.
///
/// `losses[i]` and `correct[i]` belong to candidate `i`. Returns admitted
/// candidate indices in admission order.
pub fn select_members(losses: &[f64], correct: &[Vec<bool>], size: usize, rule: QRule) -> Result<Vec<usize>, EnsembleError> {
    let n = losses.len();
    if n <= size {
        return Ok((0..n).collect());
    }
    let mut by_loss: Vec<usize> = (0..n).collect();
    by_loss.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let mut admitted: Vec<usize> = by_loss[..size / 2].to_vec();
    let mut remaining: Vec<usize> = (0..n).filter(|i| !admitted.contains(i)).collect();
    while admitted.len() < size && !remaining.is_empty() {
        let chosen = if remaining.len() == 1 {
            remaining[0]
        } else {
            let mut best: Option<(f64, usize, usize)> = None;
            for (x, &a) in remaining.iter().enumerate() {
                for &b in &remaining[x + 1..] {
                    let q = q_statistic(&correct[a], &correct[b])?.q;
                    let key = match rule {
                        QRule::MaxQ => q,
                        QRule::MinAbsQ => -q.abs(),
                    };
                    if best.is_none_or(|(k, _, _)| key > k) {
                        best = Some((key, a, b));
                    }
                }
            }
            let (_, a, b) = best.expect("at least one pair");
            if losses[b] < losses[a] {
                b
            } else {
                a
            }
        };
        admitted.push(chosen);
        remaining.retain(|&i| i != chosen);
    }
    Ok(admitted)
}

/// Builds the next ensemble for `(fs, tl)` from the classifiers in `members`.
///
/// Candidates never tuned under `(fs, tl)` are tuned now, charging the
/// phase budget up to `limit`; candidates that no longer fit in the budget
/// are skipped.
pub fn construct_ensemble(
    members: &[EvaluatedSolution],
    fs: FeatureSelector,
    tl: TransferLearner,
    state: &mut SearchState,
    memo: &mut Phase2Memo,
    ev: &Evaluator<'_>,
    limit: usize,
) -> Result<Option<ConstructedEnsemble>, EnsembleError> {
    let mut kinds: Vec<ClassifierKind> = Vec::new();
    for m in members {
        for &k in m.pipeline.clf.kinds() {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
    }
    let mut tuned = Vec::new();
    for k in kinds {
        let spec = PipelineSpec::single(fs, tl, k);
        if let Some(sol) = memo.tuned.get(&spec) {
            tuned.push(sol.clone());
            continue;
        }
        let remaining = limit.saturating_sub(state.evaluations_used);
        if remaining == 0 {
            continue;
        }
        let sol = ev.lower_level(&spec, ev.budgets.lower.max_evaluations.min(remaining), state.lower_runs)?;
        state.lower_runs += 1;
        state.evaluations_used += sol.history_len;
        memo.tuned.insert(spec, sol.clone());
        tuned.push(sol);
    }
    if tuned.is_empty() {
        return Ok(None);
    }
    let losses: Vec<f64> = tuned.iter().map(|s| s.lower_loss).collect();
    let labels = ev.training.target_y.clone();
    let correct = if tuned.len() > ev.budgets.ensemble_size {
        tuned
            .iter()
            .map(|s| Ok(correctness(&labels, &memo.validation_scores(s, ev)?)))
            .collect::<Result<Vec<_>, EnsembleError>>()?
    } else {
        Vec::new()
    };
    let admitted = select_members(&losses, &correct, ev.budgets.ensemble_size, ev.budgets.q_rule)?;
    let kind_of = |s: &EvaluatedSolution| s.pipeline.clf.kinds()[0];
    Ok(Some(ConstructedEnsemble {
        fs,
        tl,
        members: admitted.iter().map(|&i| kind_of(&tuned[i])).collect(),
        losses: tuned.iter().map(|s| (kind_of(s), s.lower_loss)).collect(),
    }))
}

/// Cross-validated AUC of a logistic meta-learner over the chosen columns.
///
/// A single column is scored directly, matching the meta bypass.
pub fn meta_validation_auc(columns: &[Vec<f64>], labels: &[u8], subset: &[usize], seed: u64) -> f64 {
    if subset.len() == 1 {
        return auc_or_half(labels, &columns[subset[0]]).0;
    }
    let chosen: Vec<Vec<f64>> = subset.iter().map(|&i| columns[i].clone()).collect();
    let x = columns_to_matrix(&chosen, labels.len());
    let folds = stratified_folds(labels, crate::learners::pipeline::OOF_FOLDS, seed);
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![0.5; labels.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != f).collect();
        let held: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == f).collect();
        let ty: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        let model = LogisticModel::fit(&x.select_rows(&train), &ty, &meta_params());
        for (&i, s) in held.iter().zip(model.predict_scores(&x.select_rows(&held))) {
            out[i] = s;
        }
    }
    auc_or_half(labels, &out).0
}

/// Index of the member whose removal costs the least validation AUC.
///
/// Ties go to the worse standalone loss, then the lower index.
pub fn prune_least_contributing(
    columns: &[Vec<f64>],
    labels: &[u8],
    standalone_losses: &[f64],
    seed: u64,
) -> Result<usize, EnsembleError> {
    let n = columns.len();
    if n < 2 {
        return Err(EnsembleError::SingletonEnsemble);
    }
    let all: Vec<usize> = (0..n).collect();
    let full = meta_validation_auc(columns, labels, &all, seed);
    let mut best: Option<(f64, f64, usize)> = None;
    for i in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let contribution = full - meta_validation_auc(columns, labels, &rest, seed);
        let better = match best {
            None => true,
            Some((c, l, _)) => contribution < c || (contribution == c && standalone_losses[i] > l),
        };
        if better {
            best = Some((contribution, standalone_losses[i], i));
        }
    }
    Ok(best.expect("at least two members").2)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Phase2Report {
    /// Pipelines of the greedy-selected pool, best first.
    pub pool: Vec<PipelineSpec>,
    /// Every ensemble pipeline constructed, in order.
    pub constructed: Vec<PipelineSpec>,
    pub evaluations_used: usize,
}

fn tuned_config(state: &SearchState, spec: &PipelineSpec) -> Option<Configuration> {
    state.evaluated.iter().rev().find(|s| &s.pipeline == spec).map(|s| s.best_config.clone())
}

/// Phase 2: per pool member, construct, evaluate and prune until a single
/// classifier remains or the phase budget is spent.
pub fn phase2_loop(state: &mut SearchState, ev: &Evaluator<'_>) -> Result<Phase2Report, EnsembleError> {
    let budgets = ev.budgets;
    let start_used = state.evaluations_used;
    let limit = start_used + budgets.phase2_evaluations;
    let mut report = Phase2Report::default();
    if budgets.phase2_evaluations == 0 || state.evaluated.is_empty() {
        return Ok(report);
    }
    let started = Instant::now();
    let deadline = budgets.phase2_seconds.map(Duration::from_secs_f64);
    let out_of_time = || deadline.is_some_and(|d| started.elapsed() >= d);

    let mut memo = Phase2Memo::new(state);
    let singles: Vec<EvaluatedSolution> =
        state.evaluated.iter().filter(|s| matches!(s.pipeline.clf, ClassifierSpec::Single(_))).cloned().collect();
    let mut pool = greedy_pool_select(&singles, budgets.pool_capacity, &mut memo, ev)?;
    pool.sort_by(|a, b| a.lower_loss.total_cmp(&b.lower_loss));
    report.pool = pool.iter().map(|s| s.pipeline.clone()).collect();
    let labels = ev.training.target_y.clone();

    'passes: while state.evaluations_used < limit {
        let pass_start = state.evaluations_used;
        for member in &pool {
            let (fs, tl) = (member.pipeline.fs, member.pipeline.tl);
            let mut remaining_members = pool.clone();
            loop {
                if state.evaluations_used >= limit || out_of_time() {
                    break 'passes;
                }
                let Some(ens) = construct_ensemble(&remaining_members, fs, tl, state, &mut memo, ev, limit)? else {
                    break;
                };
                let spec = ens.pipeline();
                report.constructed.push(spec.clone());
                upper_evaluate(&spec, state, ev, limit, 2)?;
                if ens.members.len() == 1 {
                    reselect_selection_only(state, budgets)?;
                    break;
                }
                let Some(config) = tuned_config(state, &spec) else { break };
                let columns = ens
                    .members
                    .iter()
                    .map(|&k| {
                        let single = PipelineSpec::single(fs, tl, k);
                        oof_target_scores(&single, &config, &ev.training, derive_seed(ev.seed, "validation", 0))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let losses: Vec<f64> = ens.members.iter().map(|&k| ens.loss_of(k)).collect();
                let drop = ens.members[prune_least_contributing(&columns, &labels, &losses, derive_seed(ev.seed, "prune", 0))?];
                remaining_members.retain(|m| !m.pipeline.clf.kinds().contains(&drop));
                reselect_selection_only(state, budgets)?;
            }
        }
        if state.evaluations_used == pass_start {
            break;
        }
    }
    report.evaluations_used = state.evaluations_used - start_used;
    state.termination = Some(if out_of_time() { Termination::TimeLimit } else { Termination::BudgetExhaustedCleanly });
    Ok(report)
}

/// Archive reselection without touching the tabu list.
fn reselect_selection_only(state: &mut SearchState, budgets: &crate::search::RunBudgets) -> Result<(), SearchError> {
    let tabu = state.tabu.clone();
    reselect_archive(state, budgets)?;
    state.tabu = tabu;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn q_examples() {
        let a = [true, false, true, false];
        assert_eq!(q_statistic(&a, &a).unwrap().q, 1.0);
        let b = [true, true, false, false];
        let c = [true, false, true, false];
        assert_eq!(q_statistic(&b, &c).unwrap().q, 0.0);
        let d = [false, false, true, true];
        assert_eq!(q_statistic(&b, &d).unwrap().q, -1.0);
        let z = q_statistic(&[true, true], &[true, true]).unwrap();
        assert!(z.degenerate && z.q == 0.0);
        assert_eq!(q_statistic(&[true], &[true, false]), Err(EnsembleError::LengthMismatch(1, 2)));
    }

    #[test]
    fn greedy_single_candidate_and_capacity() {
        let labels = [1, 0, 1, 0];
        let picks = greedy_select(&[vec![0.9, 0.1, 0.8, 0.3]], &labels, 6).unwrap();
        assert_eq!(picks, vec![PoolPick { candidate: 0, picks: 6, auc: 1.0 }]);
        let many: Vec<Vec<f64>> = (0..30).map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 11) as f64 / 10.0).collect()).collect();
        assert!(greedy_select(&many, &labels, 6).unwrap().len() <= 6);
    }

    #[test]
    fn greedy_picks_complementary_pair() {
        // each scorer ranks only its own half of the rows correctly
        let labels = [1, 0, 1, 0, 1, 0, 1, 0];
        let a = vec![0.9, 0.1, 0.8, 0.2, 0.5, 0.5, 0.5, 0.5];
        let b = vec![0.5, 0.5, 0.5, 0.5, 0.9, 0.1, 0.8, 0.2];
        let noise = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let picks = greedy_select(&[noise, a, b], &labels, 4).unwrap();
        let chosen: Vec<usize> = picks.iter().map(|p| p.candidate).collect();
        assert!(chosen.contains(&1) && chosen.contains(&2) && !chosen.contains(&0), "{picks:?}");
    }

    #[test]
    fn member_selection_branches() {
        assert_eq!(select_members(&[0.3, 0.2, 0.1], &[], 3, QRule::MaxQ).unwrap(), vec![0, 1, 2]);
        // five candidates, size 3: best by loss is 4; then the identical
        // pair (0, 1) has Q = 1 and admits the lower-loss 1
        let losses = [0.30, 0.25, 0.40, 0.35, 0.10];
        let correct = vec![
            vec![true, true, false, false, true, false],
            vec![true, true, false, false, true, false],
            vec![false, false, true, true, true, false],
            vec![true, false, true, false, true, false],
            vec![true, true, true, true, false, false],
        ];
        let picked = select_members(&losses, &correct, 3, QRule::MaxQ).unwrap();
        assert_eq!(picked.len(), 3);
        assert_eq!(picked[0], 4);
        assert_eq!(picked[1], 1);
        // remaining {0, 2, 3}: Q(0,2) = -0.6, Q(0,3) = Q(2,3) = 0.6 -> first pair (0, 3), admit 0
        assert_eq!(picked[2], 0);
        let diverse = select_members(&losses, &correct, 3, QRule::MinAbsQ).unwrap();
        assert_eq!(diverse.len(), 3);
    }

    #[test]
    fn pruning() {
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
        let signal: Vec<f64> = labels.iter().enumerate().map(|(i, &l)| 0.3 + 0.4 * f64::from(l) + 0.01 * (i % 5) as f64).collect();
        let noise: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 / 17.0).collect();
        assert_eq!(prune_least_contributing(&[signal.clone(), noise.clone()], &labels, &[0.1, 0.5], 0).unwrap(), 1);
        assert_eq!(prune_least_contributing(&[noise.clone(), signal.clone()], &labels, &[0.5, 0.1], 0).unwrap(), 0);
        let dup = prune_least_contributing(&[signal.clone(), signal.clone(), noise.clone()], &labels, &[0.1, 0.1, 0.5], 0).unwrap();
        assert!(dup == 2 || dup == 0, "{dup}");
        assert_eq!(prune_least_contributing(&[signal], &labels, &[0.1], 0), Err(EnsembleError::SingletonEnsemble));
    }

    proptest! {
        #[test]
        fn q_symmetric(a in proptest::collection::vec(any::<bool>(), 1..40), seed in any::<u64>()) {
            let b: Vec<bool> = a.iter().enumerate().map(|(i, x)| x ^ ((seed >> (i % 64)) & 1 == 1)).collect();
            prop_assert_eq!(q_statistic(&a, &b).unwrap(), q_statistic(&b, &a).unwrap());
            let q = q_statistic(&a, &b).unwrap().q;
            prop_assert!((-1.0..=1.0).contains(&q));
        }

        #[test]
        fn never_admits_more_than_size(losses in proptest::collection::vec(0.0f64..1.0, 1..8), size in 1usize..5) {
            let correct: Vec<Vec<bool>> = (0..losses.len()).map(|i| (0..10).map(|j| (i * 3 + j) % 4 != 0).collect()).collect();
            let picked = select_members(&losses, &correct, size, QRule::MaxQ).unwrap();
            prop_assert!(picked.len() <= size);
            prop_assert_eq!(picked.len(), losses.len().min(size));
        }
    }
}
