#![allow(dead_code)]

use cpdp_bilevel::dataspace::{make_bundle, synth_cpdp, zscore_fit_apply, DatasetBundle, Matrix, ProjectData};
use cpdp_bilevel::rng::stream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Standardized bundle over the synthetic generator with target `target`.
pub fn synth_bundle(sources: usize, rows: usize, features: usize, shift: f64, seed: u64) -> DatasetBundle {
    let projects = synth_cpdp(sources, rows, features, shift, seed).unwrap();
    zscore_fit_apply(&make_bundle(&projects, "target", 0.9, seed).unwrap())
}

/// Projects whose defects come in two kinds: half the positives are shifted
/// along feature 0 (a linear signal) and half have an inflated spread along
/// feature 1 (a signal no linear model can use).
pub fn complementary_projects(sources: usize, rows: usize, seed: u64) -> Vec<ProjectData> {
    let features = 6;
    let mut g = stream(seed, "complementary", 0);
    (0..=sources)
        .map(|p| {
            let mut data = Vec::with_capacity(rows * features);
            let mut labels = Vec::with_capacity(rows);
            for i in 0..rows {
                let kind = i % 10;
                let y = u8::from(kind < 4);
                for j in 0..features {
                    let z: f64 = StandardNormal.sample(&mut g);
                    let v = match (kind, j) {
                        (0 | 1, 0) => z + 2.5,
                        (2 | 3, 1) => z * 3.5,
                        _ => z,
                    };
                    data.push(v + 0.1 * g.random::<f64>());
                }
                labels.push(y);
            }
            let name = if p == sources { "target".to_string() } else { format!("src{p}") };
            ProjectData::new(name, Matrix::new(rows, features, data), labels).unwrap()
        })
        .collect()
}

pub fn complementary_bundle(seed: u64) -> DatasetBundle {
    zscore_fit_apply(&make_bundle(&complementary_projects(4, 300, seed), "target", 0.9, seed).unwrap())
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
