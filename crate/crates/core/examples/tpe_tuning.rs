//! Tunes one pipeline's hyperparameters with TPE and with random search under
//! the same evaluation budget.

use cpdp_bilevel::dataspace::{make_bundle, synth_cpdp, zscore_fit_apply};
use cpdp_bilevel::learners::pipeline::{holdout_loss, PipelineSpec};
use cpdp_bilevel::learners::{ClassifierKind, FeatureSelector, TransferLearner};
use cpdp_bilevel::tpe::{random_search, tpe_optimize, LowerBudget};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let projects = synth_cpdp(4, 400, 8, 4.0, 5)?;
    let bundle = zscore_fit_apply(&make_bundle(&projects, "target", 0.9, 5)?);
    let spec = PipelineSpec::single(FeatureSelector::PcaMining, TransferLearner::NnFilter, ClassifierKind::Knn);
    let space = spec.resolved_space(&bundle);
    println!("{spec}: {} hyperparameters", space.len());

    let objective = |c: &_| holdout_loss(&spec, c, &bundle, 0).map_or(1.0, |h| h.loss);
    let tpe = tpe_optimize(&space, objective, LowerBudget::evaluations(40), 1)?;
    let random = random_search(&space, objective, 40, 1);

    let (tb, rb) = (tpe.best().unwrap(), random.best().unwrap());
    println!("best so far (tpe / random):");
    for (i, (t, r)) in tpe.best_so_far().iter().zip(random.best_so_far()).enumerate().step_by(5) {
        println!("  {:>3}: {t:.4} / {r:.4}", i + 1);
    }
    println!("tpe    AUC {:.4} with {:?}", 1.0 - tb.loss, tb.config.values);
    println!("random AUC {:.4} with {:?}", 1.0 - rb.loss, rb.config.values);
    Ok(())
}
