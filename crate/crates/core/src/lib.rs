//! Multi-objective bilevel search over defect-prediction pipelines.
//!
//! The upper level explores combinations of feature selection, transfer
//! learning and classification with a multi-objective tabu search
//! ([`search`]); every candidate pipeline is tuned at the lower level by a
//! Tree-structured Parzen Estimator ([`tpe`]). The best pipelines are then
//! combined into stacking ensembles chosen by Q-statistic diversity
//! ([`ensemble`]). [`stats`] holds the Wilcoxon / Scott-Knott / A12
//! comparison harness and [`experiment`] drives whole runs from a config file.
//!
//! ```no_run
//! use cpdp_bilevel::dataspace::{make_bundle, synth_cpdp, zscore_fit_apply};
//! use cpdp_bilevel::search::{phase1_search, RunBudgets};
//!
//! let projects = synth_cpdp(5, 500, 10, 2.0, 7).unwrap();
//! let bundle = zscore_fit_apply(&make_bundle(&projects, "target", 0.9, 7).unwrap());
//! let budgets = RunBudgets::default().with_phase_evaluations(200, 25).with_lower_evaluations(5);
//! let state = phase1_search(&bundle, &budgets, 7).unwrap();
//! for sol in state.archive() {
//!     println!("{} auc={:.3}", sol.pipeline, 1.0 - sol.lower_loss);
//! }
//! ```

pub mod dataspace;
pub mod ensemble;
pub mod experiment;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod search;
pub mod stats;
pub mod tpe;
