use serde::{Deserialize, Serialize};

use super::{Configuration, LearnerError};
use crate::dataspace::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub n_neighbors: usize,
    /// Minkowski exponent.
    pub p: i32,
}

impl KnnParams {
    pub fn from_config(cfg: &Configuration, prefix: &str) -> Result<Self, LearnerError> {
        Ok(Self {
            n_neighbors: cfg.int(&format!("{prefix}.n_neigh"))?.max(1) as usize,
            p: cfg.int(&format!("{prefix}.p"))?.max(1) as i32,
        })
    }
}

/// k-nearest-neighbour vote; the score is the positive fraction among the
/// neighbours. Distance ties resolve to the lower training index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    params: KnnParams,
    x: Matrix,
    y: Vec<u8>,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[u8], params: &KnnParams) -> Self {
        Self { params: *params, x: x.clone(), y: y.to_vec() }
    }

    pub fn predict_scores(&self, q: &Matrix) -> Vec<f64> {
        let k = self.params.n_neighbors.min(self.y.len());
        let p = self.params.p;
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.y.len());
        q.iter_rows()
            .map(|row| {
                dist.clear();
                // p-th power of the Minkowski distance preserves the order
                dist.extend(
                    self.x
                        .iter_rows()
                        .enumerate()
                        .map(|(i, t)| (row.iter().zip(t).map(|(a, b)| (a - b).abs().powi(p)).sum::<f64>(), i)),
                );
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                let pos = dist[..k].iter().filter(|(_, i)| self.y[*i] == 1).count();
                pos as f64 / k as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_neighbour_recovers_training_label() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0], vec![6.0, 5.0]]);
        let y = [1, 0, 1, 0];
        let knn = Knn::fit(&x, &y, &KnnParams { n_neighbors: 1, p: 2 });
        let s = knn.predict_scores(&x);
        assert_eq!(s, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn vote_fraction_and_k_clamp() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![10.0]]);
        let y = [1, 1, 0, 0];
        let knn = Knn::fit(&x, &y, &KnnParams { n_neighbors: 3, p: 1 });
        assert!((knn.predict_scores(&Matrix::from_rows(&[vec![0.5]]))[0] - 2.0 / 3.0).abs() < 1e-12);
        let all = Knn::fit(&x, &y, &KnnParams { n_neighbors: 50, p: 3 });
        assert_eq!(all.predict_scores(&Matrix::from_rows(&[vec![100.0]])), vec![0.5]);
    }
}
