//! Logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{Configuration, LearnerError};
use crate::dataspace::Matrix;

pub const STEP_SIZE: f64 = 0.1;
pub const MAX_ITERATIONS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub penalty: Penalty,
    pub fit_intercept: bool,
    pub tol: f64,
}

impl LogisticParams {
    pub fn from_config(cfg: &Configuration, prefix: &str) -> Result<Self, LearnerError> {
        let penalty = match cfg.choice(&format!("{prefix}.penalty"))? {
            "L1" => Penalty::L1,
            "L2" => Penalty::L2,
            other => return Err(LearnerError::InvalidParam("penalty".into(), other.into())),
        };
        Ok(Self {
            penalty,
            fit_intercept: cfg.flag(&format!("{prefix}.fit_int"))?,
            tol: cfg.real(&format!("{prefix}.tol"))?,
        })
    }
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { penalty: Penalty::L2, fit_intercept: true, tol: 1e-4 }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn from_weights(weights: Vec<f64>, intercept: f64) -> Self {
        Self { weights, intercept }
    }

    /// Minimizes mean log-loss plus `penalty / n` (C = 1 scaling).
    ///
    /// L1 uses the subgradient `sign(w)`. Stops once every gradient component
    /// is below `tol` or after `MAX_ITERATIONS` steps.
    pub fn fit(x: &Matrix, y: &[u8], params: &LogisticParams) -> Self {
        let n = x.rows();
        let d = x.cols();
        let inv_n = 1.0 / n.max(1) as f64;
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut grad = vec![0.0; d];
        for _ in 0..MAX_ITERATIONS {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for (row, &label) in x.iter_rows().zip(y) {
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let err = sigmoid(z) - f64::from(label);
                for (g, v) in grad.iter_mut().zip(row) {
                    *g += err * v;
                }
                grad_b += err;
            }
            for (g, wj) in grad.iter_mut().zip(&w) {
                *g *= inv_n;
                *g += match params.penalty {
                    Penalty::L2 => wj * inv_n,
                    Penalty::L1 => {
                        if *wj > 0.0 {
                            inv_n
                        } else if *wj < 0.0 {
                            -inv_n
                        } else {
                            0.0
                        }
                    }
                };
            }
            grad_b = if params.fit_intercept { grad_b * inv_n } else { 0.0 };
            let max_grad = grad.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
            if max_grad < params.tol {
                break;
            }
            for (wj, g) in w.iter_mut().zip(&grad) {
                *wj -= STEP_SIZE * g;
            }
            b -= STEP_SIZE * grad_b;
        }
        Self { weights: w, intercept: b }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>()
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| sigmoid(self.decision(r))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_score_half() {
        let m = LogisticModel::from_weights(vec![0.0, 0.0], 0.0);
        let x = Matrix::from_rows(&[vec![1.0, -3.0], vec![100.0, 2.0]]);
        assert_eq!(m.predict_scores(&x), vec![0.5, 0.5]);
    }

    #[test]
    fn symmetric_data_without_intercept_keeps_zero_weights() {
        // each x appears with both labels: the loss gradient at w = 0 vanishes
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![-2.0], vec![-2.0]]);
        let y = [0, 1, 0, 1];
        let params = LogisticParams { penalty: Penalty::L2, fit_intercept: false, tol: 1e-6 };
        let m = LogisticModel::fit(&x, &y, &params);
        assert_eq!(m.weights, vec![0.0]);
        assert!(m.predict_scores(&x).iter().all(|&s| s == 0.5));
    }

    #[test]
    fn learns_separable_direction() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0 - 2.0, ((i * 7) % 5) as f64 / 5.0]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let x = Matrix::from_rows(&rows);
        for penalty in [Penalty::L1, Penalty::L2] {
            let m = LogisticModel::fit(&x, &y, &LogisticParams { penalty, fit_intercept: true, tol: 1e-6 });
            assert!(m.weights[0] > 0.5);
            let s = m.predict_scores(&x);
            assert!(s[0] < 0.5 && s[39] > 0.5);
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.3) + sigmoid(-0.3) - 1.0).abs() < 1e-15);
    }
}
