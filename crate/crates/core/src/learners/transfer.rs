//! Transfer-learning stage: nearest-neighbour instance filter.

use super::distance::{Distance, Metric};
use crate::dataspace::Matrix;

/// For every target row, keeps its `k` nearest source rows under `metric`.
///
/// Returns the sorted, de-duplicated source indices. Mahalanobis uses the
/// diagonal covariance of the source rows. Distance ties resolve to the
/// lower source index.
pub fn nn_filter(source: &Matrix, target: &Matrix, k: usize, metric: Metric) -> Vec<usize> {
    let n = source.rows();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let distance = Distance::new(metric, source.iter_rows(), source.cols());
    let mut chosen = vec![false; n];
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for t in target.iter_rows() {
        dist.clear();
        dist.extend(source.iter_rows().enumerate().map(|(i, s)| (distance.between(t, s), i)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        for &(_, i) in &dist[..k] {
            chosen[i] = true;
        }
    }
    chosen.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect()
}
