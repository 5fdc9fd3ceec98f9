use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::ensemble::QRule;
use crate::search::{ObjectiveMap, RunBudgets};
use crate::tpe::LowerBudget;

/// Flat TOML run configuration.
///
/// ```toml
/// datasets = ["data/ant.csv", "data/camel.csv", "data/eq.csv"]
/// target = "eq"
/// seed = 1
/// repeats = 3
/// phase1_evaluations = 400
/// phase2_evaluations = 50
/// lower_evaluations = 10
/// ```
///
/// Dataset paths are relative to the config file; each project is named after
/// its file stem. Without `datasets`, the `synth_*` keys generate a synthetic
/// benchmark whose target project is named `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub datasets: Vec<PathBuf>,
    pub target: String,
    pub train_fraction: f64,
    pub seed: u64,
    pub repeats: usize,

    pub synth_projects: Option<usize>,
    pub synth_rows: usize,
    pub synth_features: usize,
    pub synth_shift: f64,
    pub synth_seed: u64,

    pub phase1_evaluations: usize,
    pub phase2_evaluations: usize,
    pub lower_evaluations: usize,
    pub phase1_seconds: Option<f64>,
    pub phase2_seconds: Option<f64>,
    pub lower_seconds: Option<f64>,

    pub population: usize,
    pub pool_capacity: usize,
    pub ensemble_size: usize,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    pub mutation_prob: Option<f64>,
    pub mutation_eta: f64,
    pub objective_map: ObjectiveMap,
    pub q_rule: QRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = RunBudgets::default();
        Self {
            datasets: Vec::new(),
            target: "target".into(),
            train_fraction: 0.9,
            seed: 0,
            repeats: 1,
            synth_projects: None,
            synth_rows: 500,
            synth_features: 10,
            synth_shift: 2.0,
            synth_seed: 0,
            phase1_evaluations: b.phase1_evaluations,
            phase2_evaluations: b.phase2_evaluations,
            lower_evaluations: b.lower.max_evaluations,
            phase1_seconds: None,
            phase2_seconds: None,
            lower_seconds: None,
            population: b.population,
            pool_capacity: b.pool_capacity,
            ensemble_size: b.ensemble_size,
            crossover_prob: b.crossover_prob,
            crossover_eta: b.crossover_eta,
            mutation_prob: b.mutation_prob,
            mutation_eta: b.mutation_eta,
            objective_map: b.objective_map,
            q_rule: b.q_rule,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ExperimentError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(format!("{origin}: {}", describe_toml_error(text, &e))))?;
        cfg.validate().map_err(|m| ExperimentError::Config(format!("{origin}: {m}")))?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving dataset paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    pub fn budgets(&self) -> RunBudgets {
        RunBudgets {
            population: self.population,
            pool_capacity: self.pool_capacity,
            ensemble_size: self.ensemble_size,
            phase1_evaluations: self.phase1_evaluations,
            phase2_evaluations: self.phase2_evaluations,
            phase1_seconds: self.phase1_seconds,
            phase2_seconds: self.phase2_seconds,
            lower: LowerBudget { max_evaluations: self.lower_evaluations, max_seconds: self.lower_seconds },
            crossover_prob: self.crossover_prob,
            crossover_eta: self.crossover_eta,
            mutation_prob: self.mutation_prob,
            mutation_eta: self.mutation_eta,
            objective_map: self.objective_map,
            q_rule: self.q_rule,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.budgets().validate().map_err(|e| e.to_string())?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(format!("train_fraction {} not in (0, 1)", self.train_fraction));
        }
        if self.repeats == 0 {
            return Err("repeats must be at least 1".into());
        }
        if self.datasets.is_empty() && self.synth_projects.is_none() {
            return Err("either datasets or synth_projects must be given".into());
        }
        if !self.datasets.is_empty() && self.synth_projects.is_some() {
            return Err("datasets and synth_projects are mutually exclusive".into());
        }
        if self.target.is_empty() {
            return Err("target must name a project".into());
        }
        Ok(())
    }

    /// Seed of the `i`-th repeat.
    pub fn repeat_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {}", e.message())
        }
        None => e.message().to_string(),
    }
}
