//! Gaussian, multinomial and complement naive Bayes.

use serde::{Deserialize, Serialize};

use super::{Configuration, LearnerError};
use crate::dataspace::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NbType {
    Gaussian,
    Multinomial,
    Complement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    pub nb_type: NbType,
    /// Additive (Laplace) smoothing for the count-based variants.
    pub alpha: f64,
    /// Weight normalization, complement variant only.
    pub norm: bool,
}

impl NbParams {
    pub fn from_config(cfg: &Configuration, prefix: &str) -> Result<Self, LearnerError> {
        let nb_type = match cfg.choice(&format!("{prefix}.NBType"))? {
            "gauss" => NbType::Gaussian,
            "multi" => NbType::Multinomial,
            "comp" => NbType::Complement,
            other => return Err(LearnerError::InvalidParam("NBType".into(), other.into())),
        };
        Ok(Self { nb_type, alpha: cfg.real(&format!("{prefix}.alpha"))?, norm: cfg.flag(&format!("{prefix}.norm"))? })
    }
}

const MIN_ALPHA: f64 = 1e-10;
const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NaiveBayes {
    Gaussian {
        log_prior: [f64; 2],
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    /// Multinomial and complement share the linear form
    /// `jll_c = bias_c + sum_j x'_j * weight_cj` on min-shifted features.
    Counts {
        col_min: Vec<f64>,
        bias: [f64; 2],
        weight: [Vec<f64>; 2],
    },
}

impl NaiveBayes {
    /// `y` must contain both classes.
    pub fn fit(x: &Matrix, y: &[u8], params: &NbParams) -> Self {
        let d = x.cols();
        let counts = [y.iter().filter(|&&l| l == 0).count(), y.iter().filter(|&&l| l == 1).count()];
        let n = y.len() as f64;
        let log_prior = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
        match params.nb_type {
            NbType::Gaussian => {
                let mut mean = [vec![0.0; d], vec![0.0; d]];
                for (r, &l) in x.iter_rows().zip(y) {
                    for (m, v) in mean[l as usize].iter_mut().zip(r) {
                        *m += v;
                    }
                }
                for c in 0..2 {
                    mean[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
                }
                let mut var = [vec![0.0; d], vec![0.0; d]];
                for (r, &l) in x.iter_rows().zip(y) {
                    let c = l as usize;
                    for j in 0..d {
                        var[c][j] += (r[j] - mean[c][j]).powi(2);
                    }
                }
                // epsilon relative to the largest overall column variance
                let max_var = (0..d)
                    .map(|j| {
                        let col = x.column(j);
                        let mu = col.iter().sum::<f64>() / n;
                        col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n
                    })
                    .fold(0.0, f64::max);
                let eps = VAR_SMOOTHING * max_var.max(1e-3);
                for c in 0..2 {
                    var[c].iter_mut().for_each(|v| *v = *v / counts[c] as f64 + eps);
                }
                NaiveBayes::Gaussian { log_prior, mean, var }
            }
            NbType::Multinomial | NbType::Complement => {
                let col_min: Vec<f64> = (0..d).map(|j| x.column(j).into_iter().fold(f64::INFINITY, f64::min)).collect();
                let alpha = params.alpha.max(MIN_ALPHA);
                let mut feat = [vec![0.0; d], vec![0.0; d]];
                for (r, &l) in x.iter_rows().zip(y) {
                    for j in 0..d {
                        feat[l as usize][j] += (r[j] - col_min[j]).max(0.0);
                    }
                }
                if params.nb_type == NbType::Multinomial {
                    let weight = [0, 1].map(|c| {
                        let total: f64 = feat[c].iter().sum::<f64>() + alpha * d as f64;
                        feat[c].iter().map(|f| ((f + alpha) / total).ln()).collect::<Vec<_>>()
                    });
                    NaiveBayes::Counts { col_min, bias: log_prior, weight }
                } else {
                    // complement of class c is the other class for binary labels
                    let weight = [0, 1].map(|c| {
                        let comp = &feat[1 - c];
                        let total: f64 = comp.iter().sum::<f64>() + alpha * d as f64;
                        let logged: Vec<f64> = comp.iter().map(|f| ((f + alpha) / total).ln()).collect();
                        if params.norm {
                            let summed: f64 = logged.iter().sum();
                            logged.iter().map(|l| l / summed).collect::<Vec<_>>()
                        } else {
                            logged.iter().map(|l| -l).collect::<Vec<_>>()
                        }
                    });
                    NaiveBayes::Counts { col_min, bias: [0.0, 0.0], weight }
                }
            }
        }
    }

    fn joint_log_likelihood(&self, row: &[f64]) -> [f64; 2] {
        match self {
            NaiveBayes::Gaussian { log_prior, mean, var } => [0, 1].map(|c| {
                log_prior[c]
                    - 0.5
                        * row
                            .iter()
                            .zip(&mean[c])
                            .zip(&var[c])
                            .map(|((x, m), v)| (2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v)
                            .sum::<f64>()
            }),
            NaiveBayes::Counts { col_min, bias, weight } => [0, 1].map(|c| {
                bias[c] + row.iter().zip(col_min).zip(&weight[c]).map(|((x, m), w)| (x - m).max(0.0) * w).sum::<f64>()
            }),
        }
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| {
                let [l0, l1] = self.joint_log_likelihood(r);
                let s = super::logistic::sigmoid(l1 - l0);
                if s.is_finite() {
                    s
                } else {
                    0.5
                }
            })
            .collect()
    }
}
