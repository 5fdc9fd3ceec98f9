//! Phase 1 followed by phase 2: Q-statistic member selection, stacking and
//! pruning until each ensemble collapses to one classifier.

use cpdp_bilevel::dataspace::{make_bundle, synth_cpdp, zscore_fit_apply};
use cpdp_bilevel::ensemble::{correctness, phase2_loop, q_statistic};
use cpdp_bilevel::learners::pipeline::{fit_pipeline, ClassifierSpec};
use cpdp_bilevel::search::{run_phase1, Evaluator, RunBudgets, SearchState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let projects = synth_cpdp(5, 400, 8, 3.0, 21)?;
    let bundle = zscore_fit_apply(&make_bundle(&projects, "target", 0.9, 21)?);
    let budgets = RunBudgets::default().with_phase_evaluations(80, 40).with_lower_evaluations(5);
    let ev = Evaluator::new(&bundle, &budgets, 21);
    let mut state = SearchState::default();
    run_phase1(&mut state, &ev)?;
    let report = phase2_loop(&mut state, &ev)?;

    println!("pool:");
    for p in &report.pool {
        println!("  {p}");
    }
    println!("constructed:");
    for p in &report.constructed {
        println!("  {p}");
    }

    let labels = &bundle.target_test.labels;
    let singles: Vec<_> = state.archive.iter().filter(|s| matches!(s.pipeline.clf, ClassifierSpec::Single(_))).take(2).collect();
    if let [a, b] = singles[..] {
        let score = |s: &cpdp_bilevel::search::EvaluatedSolution| -> Result<Vec<f64>, Box<dyn std::error::Error>> {
            Ok(fit_pipeline(&s.pipeline, &s.best_config, &bundle, 0)?.predict_scores(&bundle.target_test.features)?)
        };
        let q = q_statistic(&correctness(labels, &score(a)?), &correctness(labels, &score(b)?))?;
        println!("Q({}, {}) = {:.3}{}", a.pipeline, b.pipeline, q.q, if q.degenerate { " (degenerate)" } else { "" });
    }

    println!("archive after phase 2:");
    for sol in state.archive() {
        println!("  {:<32} auc {:.4}", sol.pipeline.to_string(), 1.0 - sol.lower_loss);
    }
    Ok(())
}
