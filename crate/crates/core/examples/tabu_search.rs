//! Phase 1 only: multi-objective tabu search over pipelines, each tuned by TPE.

use cpdp_bilevel::dataspace::{make_bundle, synth_cpdp, zscore_fit_apply};
use cpdp_bilevel::search::{phase1_search, RunBudgets};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let projects = synth_cpdp(5, 500, 10, 2.0, 7)?;
    let bundle = zscore_fit_apply(&make_bundle(&projects, "target", 0.9, 7)?);
    println!("{bundle}");

    let budgets = RunBudgets::default().with_phase_evaluations(150, 0).with_lower_evaluations(5);
    let state = phase1_search(&bundle, &budgets, 7)?;
    println!(
        "{} lower-level evaluations over {} pipelines, termination {:?}",
        state.evaluations_used,
        state.evaluated.len(),
        state.termination
    );
    println!("tabu list: {} pipelines", state.tabu.len());
    for sol in state.archive() {
        println!("  {:<28} auc {:.4} objectives {:?}", sol.pipeline.to_string(), 1.0 - sol.lower_loss, sol.objectives);
    }
    Ok(())
}
