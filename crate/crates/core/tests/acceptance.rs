//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

mod common;

use std::time::Instant;

use cpdp_bilevel::ensemble::phase2_loop;
use cpdp_bilevel::experiment::{run, RunConfig};
use cpdp_bilevel::learners::pipeline::{holdout_loss, ClassifierSpec, PipelineSpec};
use cpdp_bilevel::learners::{ClassifierKind, Configuration};
use cpdp_bilevel::metrics::{auc, confusion, ConfusionCounts};
use cpdp_bilevel::rng::{derive_seed, stream};
use cpdp_bilevel::search::{
    dominates, non_dominated_sort, phase1_search, run_phase1, Evaluator, RunBudgets, SearchState,
};
use cpdp_bilevel::stats::{a12, scott_knott, wilcoxon_rank_sum, RunSample};
use cpdp_bilevel::tpe::{random_search, sample_uniform, tpe_optimize, LowerBudget};
use common::{complementary_bundle, median, synth_bundle};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn brute_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| {
                !left.iter().any(|&j| {
                    let (a, b) = (&points[j], &points[i]);
                    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
                })
            })
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn sorting_oracle() -> Outcome {
    let mut rng = stream(1, "acceptance-sort", 0);
    let mut mismatches = 0;
    for case in 0..500 {
        let m = [2, 3, 5][case % 3];
        let n = rng.random_range(1..=50);
        let levels = rng.random_range(2..=10);
        let points: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.random_range(0..levels) as f64).collect()).collect();
        if non_dominated_sort(&points).unwrap() != brute_fronts(&points) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 500 instances"))
}

fn pair_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn metric_oracles() -> Outcome {
    let mut rng = stream(2, "acceptance-metrics", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(2..60);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 7.0).collect();
        worst = worst.max((auc(&labels, &scores).unwrap() - pair_auc(&labels, &scores)).abs());
    }
    for _ in 0..100 {
        let (tp, fp, fn_, tn) =
            (rng.random_range(1..300u64), rng.random_range(1..300u64), rng.random_range(1..300u64), rng.random_range(1..300u64));
        let cm = ConfusionCounts::new(tp, fp, fn_, tn);
        let (tpf, fpf, fnf, tnf) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
        let n = tpf + fpf + fnf + tnf;
        // prevalence form of the correlation coefficient
        let s = (tpf + fnf) / n;
        let p = (tpf + fpf) / n;
        let mcc = (tpf / n - s * p) / (p * s * (1.0 - s) * (1.0 - p)).sqrt();
        let f1 = 1.0 / (0.5 * (1.0 / (tpf / (tpf + fpf)) + 1.0 / (tpf / (tpf + fnf))));
        worst = worst
            .max((cm.mcc() - mcc).abs())
            .max((cm.f1() - f1).abs())
            .max((cm.acc() - (tpf + tnf) / n).abs())
            .max((cm.recall() - tpf / (tpf + fnf)).abs());
    }
    let cm = confusion(&[1, 1, 0, 0], &[0.9, 0.4, 0.6, 0.1], 0.5).unwrap();
    let ok = worst <= 1e-12 && cm == ConfusionCounts::new(1, 1, 1, 1);
    outcome(ok, format!("largest deviation {worst:.2e}"))
}

fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let rank = |v: f64| {
        let less = pooled.iter().filter(|&&x| x < v).count() as f64;
        let eq = pooled.iter().filter(|&&x| x == v).count() as f64;
        less + (eq + 1.0) / 2.0
    };
    let ranks: Vec<f64> = pooled.iter().map(|&v| rank(v)).collect();
    let observed: f64 = ranks[..a.len()].iter().sum();
    let (mut le, mut ge, mut total) = (0.0, 0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1.0;
        le += f64::from(u8::from(w <= observed + 1e-9));
        ge += f64::from(u8::from(w >= observed - 1e-9));
    }
    (2.0 * le.min(ge) / total).min(1.0)
}

fn statistics_oracles() -> Outcome {
    // every split of every pooled multiset drawn from a few tie patterns
    let pools: [&[f64]; 4] = [
        &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        &[1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0],
        &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
        &[2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 3.0],
    ];
    let mut checked = 0;
    let mut mismatches = 0;
    for pool in pools {
        for n in 4..=8 {
            let values = &pool[..n];
            for mask in 0u32..(1 << n) {
                let k = mask.count_ones() as usize;
                if k < 2 || n - k < 2 {
                    continue;
                }
                let a: Vec<f64> = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| values[i]).collect();
                let b: Vec<f64> = (0..n).filter(|&i| mask >> i & 1 == 0).map(|i| values[i]).collect();
                checked += 1;
                if (wilcoxon_rank_sum(&a, &b).unwrap() - enumerated_p(&a, &b)).abs() > 1e-12 {
                    mismatches += 1;
                }
            }
        }
    }

    let mut rng = stream(3, "acceptance-stats", 0);
    let mut antisymmetry_failures = 0;
    for _ in 0..1000 {
        let a: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(0..7) as f64).collect();
        let b: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(0..7) as f64).collect();
        if a12(&a, &b) + a12(&b, &a) != 1.0 {
            antisymmetry_failures += 1;
        }
    }

    let sample = |rng: &mut cpdp_bilevel::rng::StreamRng, mu: f64, sd: f64| -> Vec<f64> {
        let d = Normal::new(mu, sd).unwrap();
        (0..31).map(|_| d.sample(rng)).collect()
    };
    let separated = vec![RunSample::new("a", sample(&mut rng, 0.0, 0.01)), RunSample::new("b", sample(&mut rng, 10.0, 0.01))];
    let mut distinct = scott_knott(&separated, 0.05).unwrap();
    distinct.dedup();
    let mut single = 0;
    for _ in 0..100 {
        let groups = vec![RunSample::new("a", sample(&mut rng, 0.7, 0.05)), RunSample::new("b", sample(&mut rng, 0.7, 0.05))];
        single += usize::from(scott_knott(&groups, 0.05).unwrap().iter().all(|&r| r == 1));
    }
    let ok = mismatches == 0 && antisymmetry_failures == 0 && distinct.len() == 2 && single >= 90;
    outcome(
        ok,
        format!(
            "{mismatches}/{checked} exact-path mismatches, {antisymmetry_failures} a12 failures, separated ranks {}, one rank in {single}/100",
            distinct.len()
        ),
    )
}

fn tpe_efficacy() -> Outcome {
    use cpdp_bilevel::learners::params::{ResolvedParam, SearchSpace};
    let space = SearchSpace::new(vec![ResolvedParam::real("x", -5.0, 5.0)]);
    let quadratic = |c: &Configuration| (c.real("x").unwrap() / 5.0).powi(2);
    let tpe: Vec<f64> = (0..20)
        .map(|s| tpe_optimize(&space, quadratic, LowerBudget::evaluations(60), s).unwrap().best().unwrap().loss)
        .collect();
    let random: Vec<f64> = (0..20).map(|s| random_search(&space, quadratic, 60, s).best().unwrap().loss).collect();
    let (mt, mr) = (median(&tpe), median(&random));
    outcome(mt < mr, format!("median best loss tpe {mt:.3e} vs random {mr:.3e}"))
}

fn search_efficacy() -> Outcome {
    let budgets = RunBudgets::default().with_phase_evaluations(200, 0);
    let mut wins = 0;
    let mut strict = 0;
    let mut notes = Vec::new();
    for seed in 0..10u64 {
        let bundle = synth_bundle(5, 500, 10, 2.0, 100 + seed);
        let state = phase1_search(&bundle, &budgets, seed).unwrap();
        let searched = 1.0 - state.best().unwrap().lower_loss;
        let all = PipelineSpec::all_single();
        let mut rng = stream(seed, "baseline", 0);
        let baseline = (0..30u64)
            .map(|i| {
                let spec = &all[rng.random_range(0..all.len())];
                let cfg = sample_uniform(&spec.resolved_space(&bundle), derive_seed(seed, "baseline-config", i));
                1.0 - holdout_loss(spec, &cfg, &bundle, derive_seed(seed, "baseline-fit", i)).unwrap().loss
            })
            .fold(0.0, f64::max);
        wins += usize::from(searched >= baseline);
        strict += usize::from(searched > baseline);
        notes.push(format!("{searched:.3}/{baseline:.3}"));
    }
    outcome(strict >= 8, format!("search beats baseline in {strict}/10 seeds ({wins} counting ties); {}", notes.join(" ")))
}

fn ensemble_efficacy() -> Outcome {
    let budgets = RunBudgets::default().with_phase_evaluations(100, 60).with_lower_evaluations(5);
    let mut wins = 0;
    let mut notes = Vec::new();
    for seed in 0..10u64 {
        let bundle = complementary_bundle(200 + seed);
        let ev = Evaluator::new(&bundle, &budgets, seed);
        let mut state = SearchState::default();
        run_phase1(&mut state, &ev).unwrap();
        let report = phase2_loop(&mut state, &ev).unwrap();
        let best_single = report
            .pool
            .iter()
            .filter_map(|p| state.evaluated.iter().filter(|s| &s.pipeline == p).map(|s| 1.0 - s.lower_loss).reduce(f64::max))
            .fold(0.0, f64::max);
        let best_ensemble = state
            .archive
            .iter()
            .filter(|s| matches!(s.pipeline.clf, ClassifierSpec::Ensemble(_)))
            .map(|s| 1.0 - s.lower_loss)
            .reduce(f64::max);
        let ok = best_ensemble.is_some_and(|e| e >= best_single - 0.01);
        wins += usize::from(ok);
        notes.push(match best_ensemble {
            Some(e) => format!("{e:.3}/{best_single:.3}"),
            None => format!("none/{best_single:.3}"),
        });
    }
    outcome(wins >= 8, format!("ensemble within 0.01 of best pool single in {wins}/10 seeds; {}", notes.join(" ")))
}

fn invariant_suite() -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    let budgets = RunBudgets::default().with_phase_evaluations(80, 30).with_lower_evaluations(4);
    for seed in 0..3u64 {
        let bundle = synth_bundle(3, 200, 6, 1.0, 300 + seed);
        let ev = Evaluator::new(&bundle, &budgets, seed);
        let mut state = SearchState::default();
        run_phase1(&mut state, &ev).unwrap();
        phase2_loop(&mut state, &ev).unwrap();
        if state.log.iter().any(|r| r.was_tabu) {
            failures.push(format!("seed {seed}: tabu pipeline re-evaluated"));
        }
        for s in &state.evaluated {
            let min = s.trial_losses.iter().copied().fold(f64::INFINITY, f64::min);
            if s.lower_loss != min || s.trial_losses.len() != s.history_len {
                failures.push(format!("seed {seed}: {} outside inducible region", s.pipeline));
            }
            let o = &s.objectives;
            if (o[0] - s.lower_loss).abs() > 1e-12 || (o[1] - (1.0 - (1.0 - o[0]).sqrt())).abs() > 1e-12 {
                failures.push(format!("seed {seed}: objective map broken for {}", s.pipeline));
            }
        }
        let pts: Vec<Vec<f64>> = state.archive.iter().map(|s| s.objectives.clone()).collect();
        let front = &non_dominated_sort(&pts).unwrap()[0];
        if front.iter().any(|&i| front.iter().any(|&j| dominates(&pts[i], &pts[j]))) {
            failures.push(format!("seed {seed}: archive front not mutually non-dominated"));
        }
        if state.archive.len() > budgets.population {
            failures.push(format!("seed {seed}: archive larger than population"));
        }
    }

    let bundle = synth_bundle(2, 40, 4, 0.5, 7);
    let mut specs = PipelineSpec::all_single();
    for s in PipelineSpec::all_single().into_iter().step_by(5) {
        specs.push(PipelineSpec { clf: ClassifierSpec::Ensemble(ClassifierKind::ALL.to_vec()), ..s });
    }
    let mut cases = 0;
    let mut out_of_bounds = 0;
    let mut rng = stream(4, "acceptance-fuzz", 0);
    while cases < 10_000 {
        let spec = &specs[rng.random_range(0..specs.len())];
        let space = spec.resolved_space(&bundle);
        if cases % 10 == 0 {
            let h = tpe_optimize(&space, |_| rng.random::<f64>(), LowerBudget::evaluations(10), cases as u64).unwrap();
            out_of_bounds += h.trials.iter().filter(|t| !space.contains(&t.config)).count();
            cases += h.trials.len();
        } else {
            out_of_bounds += usize::from(!space.contains(&sample_uniform(&space, cases as u64)));
            cases += 1;
        }
    }
    if out_of_bounds > 0 {
        failures.push(format!("{out_of_bounds} configurations out of bounds"));
    }
    let ok = failures.is_empty();
    outcome(ok, if ok { format!("all invariants hold; {cases} fuzzed configurations") } else { failures.join("; ") })
}

fn smoke_config() -> RunConfig {
    RunConfig {
        synth_projects: Some(5),
        synth_rows: 200,
        synth_features: 8,
        synth_shift: 2.0,
        synth_seed: 5,
        seed: 11,
        phase1_evaluations: 40,
        phase2_evaluations: 10,
        lower_evaluations: 5,
        ..RunConfig::default()
    }
}

fn determinism() -> Outcome {
    let cfg = smoke_config();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run(&cfg, d1.path(), false).unwrap();
    let r2 = run(&cfg, d2.path(), false).unwrap();
    let a = std::fs::read(&r1[0].result_path).unwrap();
    let b = std::fs::read(&r2[0].result_path).unwrap();
    let sa = std::fs::read(&r1[0].summary_path).unwrap();
    let sb = std::fs::read(&r2[0].summary_path).unwrap();
    outcome(a == b && sa == sb, format!("result files {} bytes, identical: {}", a.len(), a == b && sa == sb))
}

fn default_conformance() -> Outcome {
    let cfg = RunConfig::from_toml("synth_projects = 5\nsynth_rows = 200\nsynth_features = 8\n", "defaults").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome_ = run(&cfg, dir.path(), false).unwrap();
    let text = std::fs::read_to_string(&outcome_[0].result_path).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let b = &doc["metadata"]["budgets"];
    let got = (
        b["population"].as_u64(),
        b["crossover_prob"].as_f64(),
        b["crossover_eta"].as_f64(),
        b["mutation_eta"].as_f64(),
        b["ensemble_size"].as_u64(),
    );
    let ok = got == (Some(10), Some(1.0), Some(30.0), Some(20.0), Some(3));
    outcome(ok, format!("population/p_c/eta_c/eta_m/ensemble size recorded as {got:?}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("sorting oracle", sorting_oracle),
        ("metric oracles", metric_oracles),
        ("statistics oracles", statistics_oracles),
        ("TPE efficacy", tpe_efficacy),
        ("search efficacy", search_efficacy),
        ("ensemble efficacy", ensemble_efficacy),
        ("invariant suite", invariant_suite),
        ("determinism", determinism),
        ("parameter defaults", default_conformance),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let started = Instant::now();
        let result = check();
        failed += usize::from(!result.pass);
        println!(
            "criterion {} ({name}): {} [{:.1}s] {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
