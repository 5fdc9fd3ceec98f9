use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, RunConfig};
use crate::dataspace::{load_project_csv, make_bundle, synth_cpdp, write_project_csv, zscore_fit_apply, ProjectData};
use crate::ensemble::phase2_loop;
use crate::learners::pipeline::{fit_pipeline, PipelineSpec};
use crate::learners::Configuration;
use crate::metrics::{auc_or_half, MetricReport, DEFAULT_THRESHOLD};
use crate::rng::derive_seed;
use crate::search::{run_phase1, Evaluator, RunBudgets, SearchState, Termination};

pub const RESULT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub format_version: u32,
    pub crate_version: String,
    pub target: String,
    pub projects: Vec<String>,
    pub train_fraction: f64,
    pub seed: u64,
    pub repeat: usize,
    pub budgets: RunBudgets,
    pub evaluations_used: usize,
    pub phase1_evaluations_used: usize,
    pub lower_runs: usize,
    pub termination: Option<Termination>,
    pub pool: Vec<String>,
    pub ensembles_constructed: Vec<String>,
}

/// One archive member scored on the target test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub pipeline_id: String,
    pub pipeline: PipelineSpec,
    pub config: Configuration,
    pub lower_loss: f64,
    pub objectives: Vec<f64>,
    pub metrics: MetricReport,
    /// The test split holds one class, so AUC was reported as 0.5.
    pub test_single_class: bool,
    /// Fitting on the full training data failed; metrics are those of a constant 0.5 score.
    pub fit_failed: bool,
}

/// Contents of a result file. Archive members are ordered by lower-level loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub metadata: RunMetadata,
    pub archive: Vec<ArchiveEntry>,
}

impl RunResult {
    /// The member with the lowest lower-level loss.
    pub fn selected(&self) -> Option<&ArchiveEntry> {
        self.archive.first()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub seed: u64,
    pub wall_seconds: f64,
    pub phase1_seconds: f64,
    pub phase2_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub result: RunResult,
    pub timing: RunTiming,
    pub result_path: PathBuf,
    pub summary_path: PathBuf,
}

fn data_err(context: impl Into<String>) -> impl FnOnce(crate::dataspace::DataError) -> ExperimentError {
    let context = context.into();
    move |source| ExperimentError::Data { context, source }
}

/// Loads the configured CSV projects, or generates the synthetic ones.
pub fn load_projects(cfg: &RunConfig) -> Result<Vec<ProjectData>, ExperimentError> {
    match cfg.synth_projects {
        Some(k) => synth_cpdp(k, cfg.synth_rows, cfg.synth_features, cfg.synth_shift, cfg.synth_seed)
            .map_err(data_err("synthetic generator")),
        None => cfg
            .datasets
            .iter()
            .map(|p| load_project_csv(p).map_err(data_err(p.display().to_string())))
            .collect(),
    }
}

/// One complete search (phase 1, phase 2, test-split scoring) with a given seed.
pub fn run_once(cfg: &RunConfig, projects: &[ProjectData], repeat: usize) -> Result<(RunResult, RunTiming), ExperimentError> {
    let seed = cfg.repeat_seed(repeat);
    let budgets = cfg.budgets();
    budgets.validate()?;
    let started = Instant::now();
    let raw = make_bundle(projects, &cfg.target, cfg.train_fraction, seed).map_err(data_err(format!("target {}", cfg.target)))?;
    let bundle = zscore_fit_apply(&raw);

    let ev = Evaluator::new(&bundle, &budgets, seed);
    let mut state = SearchState::default();
    run_phase1(&mut state, &ev)?;
    let phase1_seconds = started.elapsed().as_secs_f64();
    let phase1_used = state.evaluations_used;
    let report = phase2_loop(&mut state, &ev)?;
    let phase2_seconds = started.elapsed().as_secs_f64() - phase1_seconds;

    let mut members: Vec<_> = state.archive.clone();
    members.sort_by(|a, b| a.lower_loss.total_cmp(&b.lower_loss).then(a.index.cmp(&b.index)));
    let labels = &bundle.target_test.labels;
    let archive = members
        .iter()
        .map(|sol| {
            let fitted = fit_pipeline(&sol.pipeline, &sol.best_config, &bundle, derive_seed(seed, "final", sol.index as u64));
            let (scores, fit_failed) = match fitted.and_then(|f| f.predict_scores(&bundle.target_test.features)) {
                Ok(s) => (s, false),
                Err(_) => (vec![0.5; labels.len()], true),
            };
            let metrics = MetricReport::compute(labels, &scores, DEFAULT_THRESHOLD)
                .map_err(|e| ExperimentError::BadResult { path: "target test split".into(), reason: e.to_string() })?;
            Ok(ArchiveEntry {
                pipeline_id: sol.pipeline.to_string(),
                pipeline: sol.pipeline.clone(),
                config: sol.best_config.clone(),
                lower_loss: sol.lower_loss,
                objectives: sol.objectives.clone(),
                metrics,
                test_single_class: auc_or_half(labels, &scores).1,
                fit_failed,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let metadata = RunMetadata {
        format_version: RESULT_FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        target: cfg.target.clone(),
        projects: projects.iter().map(|p| p.name.clone()).collect(),
        train_fraction: cfg.train_fraction,
        seed,
        repeat,
        budgets,
        evaluations_used: state.evaluations_used,
        phase1_evaluations_used: phase1_used,
        lower_runs: state.lower_runs,
        termination: state.termination,
        pool: report.pool.iter().map(ToString::to_string).collect(),
        ensembles_constructed: report.constructed.iter().map(ToString::to_string).collect(),
    };
    let timing = RunTiming { seed, wall_seconds: started.elapsed().as_secs_f64(), phase1_seconds, phase2_seconds };
    Ok((RunResult { metadata, archive }, timing))
}

fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

/// Writes `result_seed<S>.json`, `summary_seed<S>.csv` and `timing_seed<S>.json` into `out`.
pub fn write_run(result: &RunResult, timing: &RunTiming, out: &Path) -> Result<(PathBuf, PathBuf), ExperimentError> {
    std::fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    let seed = result.metadata.seed;
    let result_path = out.join(format!("result_seed{seed}.json"));
    let json = serde_json::to_string_pretty(result).expect("result serializes");
    write_text(&result_path, &(json + "\n"))?;
    let timing_path = out.join(format!("timing_seed{seed}.json"));
    write_text(&timing_path, &(serde_json::to_string_pretty(timing).expect("timing serializes") + "\n"))?;

    let summary_path = out.join(format!("summary_seed{seed}.csv"));
    let mut w = csv::Writer::from_path(&summary_path).map_err(|e| ExperimentError::BadResult {
        path: summary_path.display().to_string(),
        reason: e.to_string(),
    })?;
    let csv_err = |e: csv::Error| ExperimentError::BadResult { path: summary_path.display().to_string(), reason: e.to_string() };
    w.write_record([
        "position", "pipeline", "lower_loss", "objective_1", "objective_2", "auc", "acc", "recall", "precision", "f1", "mcc",
        "configuration",
    ])
    .map_err(csv_err)?;
    for (i, e) in result.archive.iter().enumerate() {
        let obj = |k: usize| e.objectives.get(k).map(ToString::to_string).unwrap_or_default();
        let config: Vec<String> = e.config.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let m = &e.metrics;
        w.write_record([
            (i + 1).to_string(),
            e.pipeline_id.clone(),
            e.lower_loss.to_string(),
            obj(0),
            obj(1),
            m.auc.to_string(),
            m.acc.to_string(),
            m.recall.to_string(),
            m.precision.to_string(),
            m.f1.to_string(),
            m.mcc.to_string(),
            config.join(";"),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| ExperimentError::io(&summary_path, e))?;
    Ok((result_path, summary_path))
}

/// Runs every repeat and writes its files into `out`. Repeat `i` uses seed `cfg.seed + i`.
pub fn run(cfg: &RunConfig, out: &Path, parallel_repeats: bool) -> Result<Vec<RunOutcome>, ExperimentError> {
    cfg.validate().map_err(ExperimentError::Config)?;
    let projects = load_projects(cfg)?;
    let one = |i: usize| -> Result<RunOutcome, ExperimentError> {
        let (result, timing) = run_once(cfg, &projects, i)?;
        let (result_path, summary_path) = write_run(&result, &timing, out)?;
        Ok(RunOutcome { result, timing, result_path, summary_path })
    };
    if parallel_repeats {
        (0..cfg.repeats).into_par_iter().map(one).collect()
    } else {
        (0..cfg.repeats).map(one).collect()
    }
}

/// Writes a synthetic benchmark as one CSV per project.
pub fn synth_to_dir(
    projects: usize,
    rows: usize,
    features: usize,
    shift: f64,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let data = synth_cpdp(projects, rows, features, shift, seed).map_err(|e| match e {
        crate::dataspace::DataError::InvalidSynthParams(m) => ExperimentError::Config(m),
        other => ExperimentError::Data { context: "synthetic generator".into(), source: other },
    })?;
    std::fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    data.iter()
        .map(|p| {
            let path = out.join(format!("{}.csv", p.name));
            write_project_csv(p, &path).map_err(data_err(path.display().to_string()))?;
            Ok(path)
        })
        .collect()
}
