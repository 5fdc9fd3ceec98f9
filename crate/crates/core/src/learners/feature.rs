//! Feature-selection stage: variance filter and PCA projection.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataspace::Matrix;

/// A fitted feature transform applied before transfer learning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureTransform {
    Identity,
    Columns(Vec<usize>),
    Projection { mean: Vec<f64>, components: Vec<Vec<f64>> },
}

impl FeatureTransform {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            FeatureTransform::Identity => x.clone(),
            FeatureTransform::Columns(cols) => x.select_cols(cols),
            FeatureTransform::Projection { mean, components } => x.map_rows(components.len(), |r| {
                components
                    .iter()
                    .map(|c| c.iter().zip(r).zip(mean).map(|((w, v), m)| w * (v - m)).sum())
                    .collect()
            }),
        }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            FeatureTransform::Identity => input_dim,
            FeatureTransform::Columns(c) => c.len(),
            FeatureTransform::Projection { components, .. } => components.len(),
        }
    }
}

/// Linear-interpolation quantile of an unsorted sample, `q` in `[0, 1]`.
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Keeps the columns whose variance over `reference` is at least the
/// `threshold` quantile of all column variances.
pub fn fit_variance_filter(reference: &Matrix, threshold: f64) -> FeatureTransform {
    let n = reference.rows().max(1) as f64;
    let vars: Vec<f64> = (0..reference.cols())
        .map(|j| {
            let col = reference.column(j);
            let mu = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n
        })
        .collect();
    let cut = quantile(&vars, threshold);
    let keep: Vec<usize> = vars.iter().enumerate().filter(|(_, &v)| v >= cut).map(|(j, _)| j).collect();
    FeatureTransform::Columns(keep)
}

/// Projects onto the top `dim` principal components of `x`.
///
/// Components are ordered by decreasing eigenvalue and signed so that their
/// largest-magnitude entry is positive.
pub fn fit_pca(x: &Matrix, dim: usize) -> FeatureTransform {
    let d = x.cols();
    let n = x.rows().max(2) as f64;
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / x.rows().max(1) as f64).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in x.iter_rows() {
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let components = order
        .into_iter()
        .take(dim.clamp(1, d))
        .map(|k| {
            let mut c: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = c.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            if lead < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
            c
        })
        .collect();
    FeatureTransform::Projection { mean, components }
}
