use serde::{Deserialize, Serialize};

use super::LearnerError;

/// Distance metrics shared by the neighbour filter and the centroid classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    Manhattan,
    Chebyshev,
    /// Minkowski with exponent 3.
    Minkowski,
    /// Mahalanobis with a diagonal covariance.
    Mahalanobis,
}

pub const METRIC_CHOICES: [&str; 5] = ["Euc", "Man", "Che", "Min", "Mah"];

impl Metric {
    pub fn parse(s: &str) -> Result<Self, LearnerError> {
        Ok(match s {
            "Euc" => Metric::Euclidean,
            "Man" => Metric::Manhattan,
            "Che" => Metric::Chebyshev,
            "Min" => Metric::Minkowski,
            "Mah" => Metric::Mahalanobis,
            other => return Err(LearnerError::InvalidParam("metric".into(), other.into())),
        })
    }
}

/// A metric bound to the per-column inverse variances Mahalanobis needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    metric: Metric,
    inv_var: Vec<f64>,
}

impl Distance {
    /// `reference` rows supply the diagonal covariance for Mahalanobis;
    /// zero-variance columns get weight 1.
    pub fn new<'a>(metric: Metric, reference: impl Iterator<Item = &'a [f64]>, cols: usize) -> Self {
        let inv_var = if metric == Metric::Mahalanobis {
            let rows: Vec<&[f64]> = reference.collect();
            let n = rows.len().max(1) as f64;
            (0..cols)
                .map(|j| {
                    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                    let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                    if var > 1e-12 {
                        1.0 / var
                    } else {
                        1.0
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        Self { metric, inv_var }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self.metric {
            Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Manhattan => diffs.sum(),
            Metric::Chebyshev => diffs.fold(0.0, f64::max),
            Metric::Minkowski => diffs.map(|d| d * d * d).sum::<f64>().cbrt(),
            Metric::Mahalanobis => diffs.zip(&self.inv_var).map(|(d, w)| d * d * w).sum::<f64>().sqrt(),
        }
    }
}
