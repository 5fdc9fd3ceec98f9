//! The pipeline portfolio: feature selectors, transfer learners and
//! classifiers, each with its hyperparameter space.
//!
//! Parameter names inside a [`Configuration`] are prefixed with the learner
//! id, e.g. `KNN.n_neigh` or `NNfilter.metric`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod centroid;
pub mod distance;
pub mod feature;
pub mod knn;
pub mod logistic;
pub mod naive_bayes;
pub mod params;
pub mod pipeline;
pub mod transfer;
pub mod tree;

pub use params::{Bound, Configuration, DataShape, ParamKind, ParamSpace, ParamSpec, ParamValue, SearchSpace};
pub use pipeline::{fit_pipeline, predict_scores, ClassifierSpec, FittedPipeline, PipelineSpec};

use crate::dataspace::Matrix;
use distance::METRIC_CHOICES;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("unknown learner {0:?}")]
    UnknownLearner(String),
    #[error("missing hyperparameter {0}")]
    MissingParam(String),
    #[error("invalid value {1:?} for hyperparameter {0}")]
    InvalidParam(String, String),
    #[error("training set contains a single class")]
    DegenerateTraining,
    #[error("expected {expected} columns, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    FeatureSelection,
    TransferLearning,
    Classification,
}

macro_rules! learner_ids {
    ($name:ident { $($variant:ident => $id:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $id)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn id(self) -> &'static str {
                match self {
                    $($name::$variant => $id),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&v| v == self).expect("registered variant")
            }
        }

        impl FromStr for $name {
            type Err = LearnerError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($id => Ok($name::$variant),)+
                    other => Err(LearnerError::UnknownLearner(other.to_string())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.id())
            }
        }
    };
}

learner_ids!(FeatureSelector { HfVar => "HF_var", PcaMining => "PCAmining", None => "None" });
learner_ids!(TransferLearner { NnFilter => "NNfilter", None => "None" });
learner_ids!(ClassifierKind { Nb => "NB", Knn => "KNN", Lr => "LR", Dt => "DT", Ncc => "NCC" });

impl FeatureSelector {
    pub fn space(self) -> ParamSpace {
        match self {
            FeatureSelector::HfVar => ParamSpace::new(vec![ParamSpec::real("threshold", 0.6, 0.9)]),
            FeatureSelector::PcaMining => ParamSpace::new(vec![ParamSpec::integer_bounds(
                "dim",
                Bound::Fixed(5.0),
                Bound::MaxRowsCappedByFeatures,
            )]),
            FeatureSelector::None => ParamSpace::default(),
        }
    }
}

impl TransferLearner {
    pub fn space(self) -> ParamSpace {
        match self {
            TransferLearner::NnFilter => ParamSpace::new(vec![
                ParamSpec::integer("k", 1, 100),
                ParamSpec::categorical("metric", &METRIC_CHOICES),
            ]),
            TransferLearner::None => ParamSpace::default(),
        }
    }
}

impl ClassifierKind {
    pub fn space(self) -> ParamSpace {
        let bools = ["true", "false"];
        match self {
            ClassifierKind::Nb => ParamSpace::new(vec![
                ParamSpec::categorical("NBType", &["gauss", "multi", "comp"]),
                ParamSpec::real("alpha", 0.0, 10.0),
                ParamSpec::categorical("norm", &bools),
            ]),
            ClassifierKind::Knn => {
                ParamSpace::new(vec![ParamSpec::integer("n_neigh", 1, 50), ParamSpec::integer("p", 1, 5)])
            }
            ClassifierKind::Lr => ParamSpace::new(vec![
                ParamSpec::categorical("penalty", &["L1", "L2"]),
                ParamSpec::categorical("fit_int", &bools),
                ParamSpec::real("tol", 1e-6, 0.1),
            ]),
            ClassifierKind::Dt => ParamSpace::new(vec![
                ParamSpec::categorical("criterion", &["gini", "entropy"]),
                ParamSpec::integer("min_s_l", 1, 20),
                ParamSpec::integer("max_depth", 2, 30),
            ]),
            ClassifierKind::Ncc => ParamSpace::new(vec![
                ParamSpec::categorical("metric", &METRIC_CHOICES),
                ParamSpec::real("shrink_t", 0.0, 10.0),
            ]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerEntry {
    pub id: &'static str,
    pub stage: Stage,
    pub space: ParamSpace,
}

/// Registry of every implemented learner, grouped by stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Portfolio {
    pub entries: Vec<LearnerEntry>,
}

pub fn portfolio() -> Portfolio {
    let mut entries = Vec::new();
    for &fs in FeatureSelector::ALL {
        entries.push(LearnerEntry { id: fs.id(), stage: Stage::FeatureSelection, space: fs.space() });
    }
    for &tl in TransferLearner::ALL {
        entries.push(LearnerEntry { id: tl.id(), stage: Stage::TransferLearning, space: tl.space() });
    }
    for &c in ClassifierKind::ALL {
        entries.push(LearnerEntry { id: c.id(), stage: Stage::Classification, space: c.space() });
    }
    Portfolio { entries }
}

impl Portfolio {
    /// First entry with this id. `"None"` resolves to the feature-selection
    /// entry; use [`Portfolio::lookup_in`] to disambiguate.
    pub fn lookup(&self, id: &str) -> Result<&LearnerEntry, LearnerError> {
        self.entries.iter().find(|e| e.id == id).ok_or_else(|| LearnerError::UnknownLearner(id.to_string()))
    }

    pub fn lookup_in(&self, stage: Stage, id: &str) -> Result<&LearnerEntry, LearnerError> {
        self.entries
            .iter()
            .find(|e| e.stage == stage && e.id == id)
            .ok_or_else(|| LearnerError::UnknownLearner(id.to_string()))
    }

    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &LearnerEntry> {
        self.entries.iter().filter(move |e| e.stage == stage)
    }

    /// Number of (feature selector, transfer learner, single classifier) triples.
    pub fn base_pipeline_count(&self) -> usize {
        [Stage::FeatureSelection, Stage::TransferLearning, Stage::Classification]
            .iter()
            .map(|&s| self.stage(s).count())
            .product()
    }
}

/// Registry sizes per stage, in `(fs, tl, clf)` order.
pub const STAGE_SIZES: [usize; 3] = [3, 2, 5];

/// A trained base classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FittedClassifier {
    Nb(naive_bayes::NaiveBayes),
    Knn(knn::Knn),
    Lr(logistic::LogisticModel),
    Dt(tree::DecisionTree),
    Ncc(centroid::NearestCentroid),
}

/// Fits one classifier, reading its parameters under the `kind.id()` prefix.
pub fn fit_classifier(
    kind: ClassifierKind,
    config: &Configuration,
    x: &Matrix,
    y: &[u8],
) -> Result<FittedClassifier, LearnerError> {
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(LearnerError::DegenerateTraining);
    }
    let p = kind.id();
    Ok(match kind {
        ClassifierKind::Nb => FittedClassifier::Nb(naive_bayes::NaiveBayes::fit(x, y, &naive_bayes::NbParams::from_config(config, p)?)),
        ClassifierKind::Knn => FittedClassifier::Knn(knn::Knn::fit(x, y, &knn::KnnParams::from_config(config, p)?)),
        ClassifierKind::Lr => FittedClassifier::Lr(logistic::LogisticModel::fit(x, y, &logistic::LogisticParams::from_config(config, p)?)),
        ClassifierKind::Dt => FittedClassifier::Dt(tree::DecisionTree::fit(x, y, &tree::TreeParams::from_config(config, p)?)),
        ClassifierKind::Ncc => FittedClassifier::Ncc(centroid::NearestCentroid::fit(x, y, &centroid::CentroidParams::from_config(config, p)?)),
    })
}

impl FittedClassifier {
    /// Scores are clamped into `[0, 1]`; non-finite values become 0.5.
    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        let raw = match self {
            FittedClassifier::Nb(m) => m.predict_scores(x),
            FittedClassifier::Knn(m) => m.predict_scores(x),
            FittedClassifier::Lr(m) => m.predict_scores(x),
            FittedClassifier::Dt(m) => m.predict_scores(x),
            FittedClassifier::Ncc(m) => m.predict_scores(x),
        };
        raw.into_iter().map(|s| if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.5 }).collect()
    }
}

/// Assigns each row to one of `k` folds, keeping class proportions.
///
/// Rows of each class are shuffled, then dealt round-robin with the deal
/// continuing across classes. `k` is clamped to `[1, n]`.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let k = k.clamp(1, labels.len().max(1));
    let mut rng = crate::rng::stream(seed, "folds", 0);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}
