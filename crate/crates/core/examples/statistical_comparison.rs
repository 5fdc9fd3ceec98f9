//! Wilcoxon rank-sum, A12 effect sizes and Scott-Knott ranks over repeated-run
//! samples of three methods.

use cpdp_bilevel::rng::stream;
use cpdp_bilevel::stats::{a12, scott_knott, wilcoxon_rank_sum, EffectSize, RunSample, Verdict};
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = stream(3, "example", 0);
    let mut draw = |mu: f64| -> Vec<f64> {
        let d = Normal::new(mu, 0.02).unwrap();
        (0..31).map(|_| d.sample(&mut rng)).collect()
    };
    let groups = vec![
        RunSample::new("bilevel", draw(0.74)),
        RunSample::new("tuned-single", draw(0.735)),
        RunSample::new("default-single", draw(0.69)),
    ];
    let ranks = scott_knott(&groups, 0.05)?;
    for (g, r) in groups.iter().zip(&ranks) {
        println!("{:<16} mean {:.4} scott-knott rank {r}", g.method, g.mean());
    }
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let (a, b) = (&groups[i], &groups[j]);
            let p = wilcoxon_rank_sum(&a.values, &b.values)?;
            let e = a12(&a.values, &b.values);
            let v = Verdict::classify(p, e, 0.05);
            println!("{} {} vs {}: p {p:.2e}, A12 {e:.3} ({})", v.symbol(), a.method, b.method, EffectSize::of(e));
        }
    }
    println!("small-sample exact p for [1,2,3] vs [4,5,6]: {}", wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0])?);
    Ok(())
}
