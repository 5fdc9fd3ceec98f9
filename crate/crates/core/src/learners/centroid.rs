//! Nearest (shrunken) centroid classifier.

use serde::{Deserialize, Serialize};

use super::distance::{Distance, Metric};
use super::logistic::sigmoid;
use super::{Configuration, LearnerError};
use crate::dataspace::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidParams {
    pub metric: Metric,
    /// Soft-threshold applied to standardized centroid deviations; 0 disables.
    pub shrink_threshold: f64,
}

impl CentroidParams {
    pub fn from_config(cfg: &Configuration, prefix: &str) -> Result<Self, LearnerError> {
        Ok(Self {
            metric: Metric::parse(cfg.choice(&format!("{prefix}.metric"))?)?,
            shrink_threshold: cfg.real(&format!("{prefix}.shrink_t"))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    centroids: [Vec<f64>; 2],
    distance: Distance,
}

impl NearestCentroid {
    pub fn fit(x: &Matrix, y: &[u8], params: &CentroidParams) -> Self {
        let d = x.cols();
        let n = y.len() as f64;
        let counts = [y.iter().filter(|&&l| l == 0).count() as f64, y.iter().filter(|&&l| l == 1).count() as f64];
        let mut centroids = [vec![0.0; d], vec![0.0; d]];
        for (r, &l) in x.iter_rows().zip(y) {
            for (c, v) in centroids[l as usize].iter_mut().zip(r) {
                *c += v;
            }
        }
        for c in 0..2 {
            centroids[c].iter_mut().for_each(|v| *v /= counts[c]);
        }

        if params.shrink_threshold > 0.0 {
            let overall: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / n).collect();
            let mut within = vec![0.0; d];
            for (r, &l) in x.iter_rows().zip(y) {
                for j in 0..d {
                    within[j] += (r[j] - centroids[l as usize][j]).powi(2);
                }
            }
            let dof = (n - 2.0).max(1.0);
            let s: Vec<f64> = within.iter().map(|w| (w / dof).sqrt()).collect();
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            let s0 = if d % 2 == 1 { sorted[d / 2] } else { 0.5 * (sorted[d / 2 - 1] + sorted[d / 2]) };
            for c in 0..2 {
                let m = (1.0 / counts[c] - 1.0 / n).max(0.0).sqrt();
                for j in 0..d {
                    let scale = m * (s[j] + s0);
                    if scale <= 0.0 {
                        continue;
                    }
                    let dev = (centroids[c][j] - overall[j]) / scale;
                    let shrunk = dev.signum() * (dev.abs() - params.shrink_threshold).max(0.0);
                    centroids[c][j] = overall[j] + scale * shrunk;
                }
            }
        }
        let distance = Distance::new(params.metric, x.iter_rows(), d);
        Self { centroids, distance }
    }

    /// `P(1) = exp(-d1) / (exp(-d0) + exp(-d1))`.
    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| {
                let d0 = self.distance.between(r, &self.centroids[0]);
                let d1 = self.distance.between(r, &self.centroids[1]);
                sigmoid(d0 - d1)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_follow_distance_softmax() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 2.0], vec![4.0, 0.0], vec![4.0, 2.0]]);
        let y = [0, 0, 1, 1];
        let ncc = NearestCentroid::fit(&x, &y, &CentroidParams { metric: Metric::Euclidean, shrink_threshold: 0.0 });
        // centroids (0,1) and (4,1)
        let s = ncc.predict_scores(&Matrix::from_rows(&[vec![1.0, 1.0]]))[0];
        let expected = (-3.0f64).exp() / ((-1.0f64).exp() + (-3.0f64).exp());
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn large_shrinkage_collapses_centroids() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0], vec![4.0]]);
        let y = [0, 0, 1, 1];
        let ncc = NearestCentroid::fit(&x, &y, &CentroidParams { metric: Metric::Manhattan, shrink_threshold: 10.0 });
        assert_eq!(ncc.centroids[0], ncc.centroids[1]);
        assert!(ncc.predict_scores(&x).iter().all(|&s| s == 0.5));
    }
}
