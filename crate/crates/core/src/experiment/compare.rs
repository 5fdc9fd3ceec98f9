use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, RunResult};
use crate::metrics::MetricId;
use crate::stats::{a12, scott_knott, wilcoxon_rank_sum, EffectSize, RunSample, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub scott_knott_rank: usize,
}

/// Method `a` against method `b`; verdicts read from `a`'s side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub p_value: f64,
    pub verdict: Verdict,
    pub a12: f64,
    pub effect: EffectSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetComparison {
    pub dataset: String,
    pub methods: Vec<MethodSummary>,
    pub pairs: Vec<PairComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub metric: MetricId,
    pub alpha: f64,
    pub datasets: Vec<DatasetComparison>,
}

/// Every `result_seed*.json` in `dir`, sorted by file name.
pub fn load_results(dir: &Path) -> Result<Vec<RunResult>, ExperimentError> {
    let entries = std::fs::read_dir(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("result_seed") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| ExperimentError::io(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| ExperimentError::BadResult { path: p.display().to_string(), reason: e.to_string() })
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Compares the methods stored in `dirs` (one method per directory, named by its path).
///
/// Each run contributes the test metric of its lowest-loss archive member.
pub fn compare_dirs(dirs: &[PathBuf], metric: MetricId, alpha: f64) -> Result<CompareReport, ExperimentError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ExperimentError::Config(format!("alpha {alpha} not in (0, 1)")));
    }
    // dataset -> method -> values
    let mut table: BTreeMap<String, Vec<RunSample>> = BTreeMap::new();
    for dir in dirs {
        let method = dir.display().to_string();
        let mut by_dataset: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for result in load_results(dir)? {
            let entry = result.selected().ok_or_else(|| ExperimentError::BadResult {
                path: dir.display().to_string(),
                reason: format!("seed {} has an empty archive", result.metadata.seed),
            })?;
            by_dataset.entry(result.metadata.target.clone()).or_default().push(entry.metrics.get(metric));
        }
        if by_dataset.is_empty() {
            return Err(ExperimentError::InsufficientRepeats { method, dataset: "(none)".into(), got: 0 });
        }
        for (dataset, values) in by_dataset {
            table.entry(dataset).or_default().push(RunSample::new(method.clone(), values));
        }
    }

    let mut datasets = Vec::new();
    for (dataset, samples) in table {
        if let Some(s) = samples.iter().find(|s| s.values.len() < 2) {
            return Err(ExperimentError::InsufficientRepeats {
                method: s.method.clone(),
                dataset,
                got: s.values.len(),
            });
        }
        let ranks = if samples.len() >= 2 {
            scott_knott(&samples, alpha).map_err(|e| ExperimentError::Config(e.to_string()))?
        } else {
            vec![1]
        };
        let methods = samples
            .iter()
            .zip(&ranks)
            .map(|(s, &r)| MethodSummary {
                method: s.method.clone(),
                values: s.values.clone(),
                mean: s.mean(),
                median: median(&s.values),
                scott_knott_rank: r,
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                let (a, b) = (&samples[i].values, &samples[j].values);
                let p = wilcoxon_rank_sum(a, b).map_err(|e| ExperimentError::Config(e.to_string()))?;
                let effect = a12(a, b);
                pairs.push(PairComparison {
                    a: samples[i].method.clone(),
                    b: samples[j].method.clone(),
                    p_value: p,
                    verdict: Verdict::classify(p, effect, alpha),
                    a12: effect,
                    effect: EffectSize::of(effect),
                });
            }
        }
        datasets.push(DatasetComparison { dataset, methods, pairs });
    }
    Ok(CompareReport { metric, alpha, datasets })
}

impl CompareReport {
    /// Plain-text rendering.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "metric: {}   alpha: {}", self.metric, self.alpha);
        let _ = writeln!(s, "† = significantly better, ≈ = no significant difference, ‡ = significantly worse");
        for d in &self.datasets {
            let _ = writeln!(s, "\n== {} ==", d.dataset);
            let _ = writeln!(s, "{:<32} {:>4} {:>10} {:>10} {:>4}", "method", "n", "mean", "median", "sk");
            for m in &d.methods {
                let _ = writeln!(
                    s,
                    "{:<32} {:>4} {:>10.5} {:>10.5} {:>4}",
                    m.method,
                    m.values.len(),
                    m.mean,
                    m.median,
                    m.scott_knott_rank
                );
            }
            for p in &d.pairs {
                let _ = writeln!(
                    s,
                    "{} {} vs {}: p={:.4e} A12={:.3} ({})",
                    p.verdict.symbol(),
                    p.a,
                    p.b,
                    p.p_value,
                    p.a12,
                    p.effect
                );
            }
        }
        s
    }
}
