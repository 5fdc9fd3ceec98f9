mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cpdp_bilevel::experiment::{compare_dirs, load_results, run, write_run, ExperimentError, RunConfig, RunResult};
use cpdp_bilevel::metrics::MetricId;
use cpdp_bilevel::rng::stream;
use cpdp_bilevel::stats::{EffectSize, Verdict};
use rand_distr::{Distribution, Normal};

fn smoke_config() -> RunConfig {
    RunConfig {
        synth_projects: Some(5),
        synth_rows: 500,
        synth_features: 10,
        synth_shift: 2.0,
        synth_seed: 1,
        seed: 9,
        phase1_evaluations: 40,
        phase2_evaluations: 10,
        lower_evaluations: 5,
        ..RunConfig::default()
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpdp"))
}

#[test]
fn smoke_run_completes_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let outcomes = run(&smoke_config(), dir.path(), false).unwrap();
    assert!(started.elapsed().as_secs_f64() < 60.0);
    let o = &outcomes[0];
    assert!(!o.result.archive.is_empty());
    let back = load_results(dir.path()).unwrap();
    assert_eq!(back, vec![o.result.clone()]);
    for e in &o.result.archive {
        assert!((0.0..=1.0).contains(&e.metrics.auc));
        assert_eq!(e.pipeline_id, e.pipeline.to_string());
    }
    let csv = std::fs::read_to_string(&o.summary_path).unwrap();
    assert_eq!(csv.lines().count(), o.result.archive.len() + 1);
    assert!(dir.path().join("timing_seed9.json").is_file());
}

#[test]
fn repeats_get_distinct_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { repeats: 3, phase1_evaluations: 10, phase2_evaluations: 0, lower_evaluations: 2, ..smoke_config() };
    let outcomes = run(&cfg, dir.path(), true).unwrap();
    let seeds: Vec<u64> = outcomes.iter().map(|o| o.result.metadata.seed).collect();
    assert_eq!(seeds, vec![9, 10, 11]);
    assert_eq!(load_results(dir.path()).unwrap().len(), 3);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let status = cli()
        .args(["synth", "--projects", "2", "--rows", "40", "--features", "3", "--shift", "1", "--seed", "2", "--out"])
        .arg(dir.path().join("data"))
        .status()
        .unwrap();
    assert!(status.success());
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "datasets = [\"data/src0.csv\", \"data/src1.csv\", \"data/target.csv\"]\nphase1_evaluations = 10\nphase2_evaluations = 2\nlower_evaluations = 2\n",
    )
    .unwrap();
    let ok = cli().args(["run", "--seed", "4", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("out")).status().unwrap();
    assert!(ok.success());
    assert!(dir.path().join("out/result_seed4.json").is_file());

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, "datasets = [\"data/nope.csv\", \"data/target.csv\"]\n").unwrap();
    let code = cli().args(["run", "--config"]).arg(&missing).status().unwrap().code();
    assert_eq!(code, Some(3));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "synth_projects = 2\npopulation = 0\n").unwrap();
    assert_eq!(cli().args(["run", "--config"]).arg(&bad).status().unwrap().code(), Some(2));
}

/// A result set for `method` whose selected AUC values are `values`.
fn planted(dir: &Path, template: &RunResult, values: &[f64]) {
    for (i, &v) in values.iter().enumerate() {
        let mut r = template.clone();
        r.metadata.seed = i as u64;
        r.archive[0].metrics.auc = v;
        let timing = cpdp_bilevel::experiment::RunTiming { seed: i as u64, wall_seconds: 0.0, phase1_seconds: 0.0, phase2_seconds: 0.0 };
        write_run(&r, &timing, dir).unwrap();
    }
}

fn template() -> RunResult {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { phase1_evaluations: 10, phase2_evaluations: 0, lower_evaluations: 2, ..smoke_config() };
    run(&cfg, dir.path(), false).unwrap().remove(0).result
}

fn normal(seed: u64, mu: f64, n: usize) -> Vec<f64> {
    let mut g = stream(seed, "planted", 0);
    let d = Normal::new(mu, 0.01).unwrap();
    (0..n).map(|_| d.sample(&mut g)).collect()
}

#[test]
fn compare_reports() {
    let t = template();
    let root = tempfile::tempdir().unwrap();
    let (a, b, c) = (root.path().join("a"), root.path().join("b"), root.path().join("c"));

    planted(&a, &t, &[0.7, 0.72, 0.71]);
    planted(&b, &t, &[0.7, 0.72, 0.71]);
    let same = compare_dirs(&[a.clone(), b.clone()], MetricId::Auc, 0.05).unwrap();
    let d = &same.datasets[0];
    assert!(d.pairs.iter().all(|p| p.verdict == Verdict::Equivalent && p.a12 == 0.5));
    assert!(d.methods.iter().all(|m| m.scott_knott_rank == 1));

    let (hi, lo) = (root.path().join("hi"), root.path().join("lo"));
    planted(&hi, &t, &normal(1, 0.80, 31));
    planted(&lo, &t, &normal(2, 0.77, 31));
    let shifted = compare_dirs(&[hi.clone(), lo.clone()], MetricId::Auc, 0.05).unwrap();
    let p = &shifted.datasets[0].pairs[0];
    assert_eq!((p.verdict, p.effect), (Verdict::Better, EffectSize::Large));
    assert!(shifted.render().contains('†'));

    planted(&c, &t, &normal(3, 0.77, 31));
    let hi2 = root.path().join("hi2");
    planted(&hi2, &t, &normal(4, 0.80, 31));
    let three = compare_dirs(&[hi, hi2, c], MetricId::Auc, 0.05).unwrap();
    let ranks: Vec<usize> = three.datasets[0].methods.iter().map(|m| m.scott_knott_rank).collect();
    assert_eq!(ranks, vec![1, 1, 2]);

    let single = root.path().join("single");
    planted(&single, &t, &[0.7]);
    assert!(matches!(
        compare_dirs(&[a, single], MetricId::Auc, 0.05),
        Err(ExperimentError::InsufficientRepeats { got: 1, .. })
    ));
}
