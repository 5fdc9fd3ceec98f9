//! Binary classification metrics.
//!
//! Every ratio with a zero denominator evaluates to 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("labels and scores differ in length ({labels} vs {scores})")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("no rows to evaluate")]
    Empty,
    #[error("only one class present")]
    SingleClass,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn check_lengths(labels: &[u8], scores: &[f64]) -> Result<(), MetricError> {
    if labels.len() != scores.len() {
        return Err(MetricError::LengthMismatch { labels: labels.len(), scores: scores.len() });
    }
    if labels.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Counts predictions where a row is predicted positive iff `score >= threshold`.
pub fn confusion(labels: &[u8], scores: &[f64], threshold: f64) -> Result<ConfusionCounts, MetricError> {
    check_lengths(labels, scores)?;
    let mut cm = ConfusionCounts::default();
    for (&l, &s) in labels.iter().zip(scores) {
        match (l == 1, s >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn acc(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let mut margins = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        // fixed multiplication order makes label flips exact negations
        margins.sort_by(f64::total_cmp);
        let den = margins.iter().product::<f64>();
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / den.sqrt()
        }
    }
}

/// Area under the ROC curve as the Mann-Whitney statistic; ties count half.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64, MetricError> {
    check_lengths(labels, scores)?;
    let n1 = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n0 = labels.len() as u64 - n1;
    if n1 == 0 || n0 == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // doubled mid-ranks keep the statistic integral
    let mut pos_rank2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank2 = (i + j + 2) as u64;
        pos_rank2 += rank2 * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        i = j + 1;
    }
    let u2 = pos_rank2 - n1 * (n1 + 1);
    let d = 2 * n1 * n0;
    Ok(if 2 * u2 <= d { u2 as f64 / d as f64 } else { 1.0 - (d - u2) as f64 / d as f64 })
}

/// AUC, or 0.5 with `true` when only one class is present.
pub fn auc_or_half(labels: &[u8], scores: &[f64]) -> (f64, bool) {
    match auc(labels, scores) {
        Ok(a) => (a, false),
        Err(MetricError::SingleClass) => (0.5, true),
        Err(e) => panic!("auc called with invalid inputs: {e}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricId {
    Auc,
    Acc,
    Recall,
    Precision,
    F1,
    Mcc,
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "auc" => MetricId::Auc,
            "acc" => MetricId::Acc,
            "recall" => MetricId::Recall,
            "precision" => MetricId::Precision,
            "f1" => MetricId::F1,
            "mcc" => MetricId::Mcc,
            _ => return Err(MetricError::UnknownMetric(s.to_string())),
        })
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricId::Auc => "auc",
            MetricId::Acc => "acc",
            MetricId::Recall => "recall",
            MetricId::Precision => "precision",
            MetricId::F1 => "f1",
            MetricId::Mcc => "mcc",
        })
    }
}

/// All reported metrics for one score vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub acc: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl MetricReport {
    pub fn compute(labels: &[u8], scores: &[f64], threshold: f64) -> Result<Self, MetricError> {
        let cm = confusion(labels, scores, threshold)?;
        let (auc, _) = auc_or_half(labels, scores);
        Ok(Self { auc, acc: cm.acc(), recall: cm.recall(), precision: cm.precision(), f1: cm.f1(), mcc: cm.mcc() })
    }

    pub fn get(&self, id: MetricId) -> f64 {
        match id {
            MetricId::Auc => self.auc,
            MetricId::Acc => self.acc,
            MetricId::Recall => self.recall,
            MetricId::Precision => self.precision,
            MetricId::F1 => self.f1,
            MetricId::Mcc => self.mcc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(labels: &[u8], scores: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[1, 0], &[0.9, 0.1], 0.5).unwrap(), ConfusionCounts::new(1, 0, 0, 1));
        assert_eq!(confusion(&[1, 0], &[0.5, 0.5], 0.5).unwrap(), ConfusionCounts::new(1, 1, 0, 0));
        assert_eq!(
            confusion(&[1, 1, 0, 0, 1], &[0.9, 0.4, 0.6, 0.2, 0.7], 0.5).unwrap(),
            ConfusionCounts::new(2, 1, 1, 1)
        );
        assert!(matches!(confusion(&[1], &[0.1, 0.2], 0.5), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[1, 1, 0, 0], &[0.9, 0.8, 0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&[1, 0, 1, 0], &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(auc(&[1, 0, 1, 0], &[0.8, 0.8, 0.3, 0.1]).unwrap(), 0.625);
        assert_eq!(auc(&[1, 1], &[0.1, 0.2]), Err(MetricError::SingleClass));
        assert_eq!(auc_or_half(&[0, 0], &[0.1, 0.2]), (0.5, true));
    }

    #[test]
    fn ratio_metrics() {
        let all = ConfusionCounts::new(25, 25, 25, 25);
        assert_eq!(all.mcc(), 0.0);
        let perfect = ConfusionCounts::new(10, 0, 0, 10);
        for v in [perfect.acc(), perfect.recall(), perfect.precision(), perfect.f1(), perfect.mcc()] {
            assert_eq!(v, 1.0);
        }
        let cm = ConfusionCounts::new(3, 1, 2, 4);
        assert!((cm.acc() - 0.7).abs() < 1e-12);
        assert!((cm.recall() - 0.6).abs() < 1e-12);
        assert!((cm.precision() - 0.75).abs() < 1e-12);
        assert!((cm.f1() - 2.0 / 3.0).abs() < 1e-12);
        // margins 4, 5, 5, 6
        assert!((cm.mcc() - 10.0 / 600f64.sqrt()).abs() < 1e-12);
        assert_eq!(ConfusionCounts::default().f1(), 0.0);
        assert_eq!(ConfusionCounts::new(0, 0, 5, 5).precision(), 0.0);
    }

    #[test]
    fn metric_ids_parse() {
        assert_eq!("MCC".parse::<MetricId>().unwrap(), MetricId::Mcc);
        assert!("brier".parse::<MetricId>().is_err());
    }

    fn labelled_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
        (2usize..50).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..2, n).prop_filter("both classes", |l| l.contains(&0) && l.contains(&1)),
                // coarse grid forces ties
                proptest::collection::vec((0u8..12).prop_map(|v| v as f64 / 11.0), n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pair_counting((labels, scores) in labelled_scores()) {
            prop_assert!((auc(&labels, &scores).unwrap() - brute_auc(&labels, &scores)).abs() < 1e-12);
        }

        #[test]
        fn auc_negation_is_complement((labels, scores) in labelled_scores()) {
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert_eq!(auc(&labels, &scores).unwrap() + auc(&labels, &neg).unwrap(), 1.0);
        }

        #[test]
        fn mcc_bounded_and_flip_antisymmetric(tp in 0u64..200, fp in 0u64..200, fn_ in 0u64..200, tn in 0u64..200) {
            let cm = ConfusionCounts::new(tp, fp, fn_, tn);
            prop_assert!((-1.0..=1.0).contains(&cm.mcc()));
            if tp > 0 && fp > 0 && fn_ > 0 && tn > 0 {
                let flipped = ConfusionCounts::new(fn_, tn, tp, fp);
                prop_assert_eq!(flipped.mcc(), -cm.mcc());
            }
        }

        #[test]
        fn f1_closed_form(tp in 0u64..200, fp in 0u64..200, fn_ in 0u64..200) {
            let cm = ConfusionCounts::new(tp, fp, fn_, 0);
            let closed = if tp + fp + fn_ == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
            prop_assert!((cm.f1() - closed).abs() < 1e-12);
        }
    }
}
