//! Three-stage pipelines: feature selection, transfer learning, classifier.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::distance::Metric;
use super::feature::{fit_pca, fit_variance_filter, FeatureTransform};
use super::logistic::{LogisticModel, LogisticParams};
use super::transfer::nn_filter;
use super::{
    fit_classifier, stratified_folds, ClassifierKind, Configuration, DataShape, FeatureSelector, FittedClassifier,
    LearnerError, ParamSpace, SearchSpace, TransferLearner,
};
use crate::dataspace::{DatasetBundle, Matrix};
use crate::metrics::auc_or_half;

/// Folds used for out-of-fold scores, both for stacking and validation.
pub const OOF_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierSpec {
    Single(ClassifierKind),
    /// Stacked base classifiers, in admission order.
    Ensemble(Vec<ClassifierKind>),
}

impl ClassifierSpec {
    pub fn kinds(&self) -> &[ClassifierKind] {
        match self {
            ClassifierSpec::Single(k) => std::slice::from_ref(k),
            ClassifierSpec::Ensemble(ks) => ks,
        }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierSpec::Single(k) => write!(f, "{k}"),
            ClassifierSpec::Ensemble(ks) => {
                let ids: Vec<&str> = ks.iter().map(|k| k.id()).collect();
                write!(f, "Stack[{}]", ids.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub fs: FeatureSelector,
    pub tl: TransferLearner,
    pub clf: ClassifierSpec,
}

impl fmt::Display for PipelineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}+{}", self.fs, self.tl, self.clf)
    }
}

impl PipelineSpec {
    pub fn single(fs: FeatureSelector, tl: TransferLearner, clf: ClassifierKind) -> Self {
        Self { fs, tl, clf: ClassifierSpec::Single(clf) }
    }

    /// Stage indices, defined for single-classifier pipelines only.
    pub fn encode(&self) -> Option<[usize; 3]> {
        match self.clf {
            ClassifierSpec::Single(k) => Some([self.fs.index(), self.tl.index(), k.index()]),
            ClassifierSpec::Ensemble(_) => None,
        }
    }

    pub fn decode(genes: [usize; 3]) -> Option<Self> {
        Some(Self::single(
            *FeatureSelector::ALL.get(genes[0])?,
            *TransferLearner::ALL.get(genes[1])?,
            *ClassifierKind::ALL.get(genes[2])?,
        ))
    }

    /// Every single-classifier pipeline, in stage-index order.
    pub fn all_single() -> Vec<PipelineSpec> {
        let mut out = Vec::new();
        for &fs in FeatureSelector::ALL {
            for &tl in TransferLearner::ALL {
                for &c in ClassifierKind::ALL {
                    out.push(Self::single(fs, tl, c));
                }
            }
        }
        out
    }

    /// Union of the stage spaces with names prefixed by learner id.
    pub fn space(&self) -> ParamSpace {
        let mut parts = vec![self.fs.space().prefixed(self.fs.id()), self.tl.space().prefixed(self.tl.id())];
        let mut seen = Vec::new();
        for &k in self.clf.kinds() {
            if !seen.contains(&k) {
                seen.push(k);
                parts.push(k.space().prefixed(k.id()));
            }
        }
        ParamSpace::concat(parts)
    }

    pub fn resolved_space(&self, bundle: &DatasetBundle) -> SearchSpace {
        self.space().resolve(&shape_of(bundle))
    }
}

pub fn shape_of(bundle: &DatasetBundle) -> DataShape {
    DataShape {
        source_rows: bundle.source_rows(),
        target_rows: bundle.target_train.len(),
        feature_count: bundle.feature_count,
    }
}

/// Raw training material before any stage is fitted.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub source_x: Matrix,
    pub source_y: Vec<u8>,
    pub target_x: Matrix,
    pub target_y: Vec<u8>,
}

impl TrainingData {
    pub fn from_bundle(bundle: &DatasetBundle) -> Self {
        let (source_x, source_y) = bundle.source_stack();
        Self {
            source_x,
            source_y,
            target_x: bundle.target_train.features.clone(),
            target_y: bundle.target_train.labels.clone(),
        }
    }

    /// The same sources with only the given target rows kept.
    pub fn with_target_rows(&self, rows: &[usize]) -> Self {
        Self {
            source_x: self.source_x.clone(),
            source_y: self.source_y.clone(),
            target_x: self.target_x.select_rows(rows),
            target_y: rows.iter().map(|&i| self.target_y[i]).collect(),
        }
    }
}

/// Base classifiers combined by a logistic meta-learner over their scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub bases: Vec<FittedClassifier>,
    /// `None` for a single base, whose scores pass through unchanged.
    pub meta: Option<LogisticModel>,
}

impl StackedModel {
    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        let columns: Vec<Vec<f64>> = self.bases.iter().map(|b| b.predict_scores(x)).collect();
        match &self.meta {
            None => columns.into_iter().next().unwrap_or_else(|| vec![0.5; x.rows()]),
            Some(meta) => meta.predict_scores(&columns_to_matrix(&columns, x.rows())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Single(FittedClassifier),
    Stacked(StackedModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub spec: PipelineSpec,
    pub transform: FeatureTransform,
    /// Source rows kept by the transfer stage, as indices into the stacked sources.
    pub selected_source: Vec<usize>,
    pub model: FittedModel,
    pub feature_count: usize,
}

pub(crate) fn columns_to_matrix(columns: &[Vec<f64>], rows: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m.row_mut(i)[j] = v;
        }
    }
    m
}

fn usize_param(config: &Configuration, name: &str) -> Result<usize, LearnerError> {
    let v = config.int(name)?;
    usize::try_from(v).map_err(|_| LearnerError::InvalidParam(name.to_string(), v.to_string()))
}

fn fit_feature_stage(fs: FeatureSelector, config: &Configuration, data: &TrainingData) -> Result<FeatureTransform, LearnerError> {
    Ok(match fs {
        FeatureSelector::None => FeatureTransform::Identity,
        // variances are read on the target sample; the joint sample is standardized
        FeatureSelector::HfVar => fit_variance_filter(&data.target_x, config.real("HF_var.threshold")?),
        FeatureSelector::PcaMining => {
            fit_pca(&data.source_x.vstack(&data.target_x), usize_param(config, "PCAmining.dim")?)
        }
    })
}

/// Classifier training rows after the transfer stage.
fn transfer_stage(
    tl: TransferLearner,
    config: &Configuration,
    source: &Matrix,
    target: &Matrix,
) -> Result<Vec<usize>, LearnerError> {
    Ok(match tl {
        TransferLearner::None => (0..source.rows()).collect(),
        TransferLearner::NnFilter => {
            let k = usize_param(config, "NNfilter.k")?;
            let metric = Metric::parse(config.choice("NNfilter.metric")?)?;
            nn_filter(source, target, k, metric)
        }
    })
}

/// Out-of-fold scores of each base classifier over `(x, y)`.
///
/// A fold whose training part is single-class scores 0.5 throughout.
pub fn stacking_features(
    kinds: &[ClassifierKind],
    config: &Configuration,
    x: &Matrix,
    y: &[u8],
    seed: u64,
) -> Result<Vec<Vec<f64>>, LearnerError> {
    let folds = stratified_folds(y, OOF_FOLDS, seed);
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let mut columns = vec![vec![0.5; y.len()]; kinds.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
        let held: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
        if train.is_empty() || held.is_empty() {
            continue;
        }
        let tx = x.select_rows(&train);
        let ty: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let hx = x.select_rows(&held);
        for (col, &kind) in columns.iter_mut().zip(kinds) {
            match fit_classifier(kind, config, &tx, &ty) {
                Ok(model) => {
                    for (&i, s) in held.iter().zip(model.predict_scores(&hx)) {
                        col[i] = s;
                    }
                }
                Err(LearnerError::DegenerateTraining) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(columns)
}

pub fn meta_params() -> LogisticParams {
    LogisticParams::default()
}

fn fit_model(spec: &ClassifierSpec, config: &Configuration, x: &Matrix, y: &[u8], seed: u64) -> Result<FittedModel, LearnerError> {
    match spec {
        ClassifierSpec::Single(kind) => Ok(FittedModel::Single(fit_classifier(*kind, config, x, y)?)),
        ClassifierSpec::Ensemble(kinds) => {
            let bases = kinds.iter().map(|&k| fit_classifier(k, config, x, y)).collect::<Result<Vec<_>, _>>()?;
            let meta = if kinds.len() > 1 {
                let columns = stacking_features(kinds, config, x, y, seed)?;
                Some(LogisticModel::fit(&columns_to_matrix(&columns, y.len()), y, &meta_params()))
            } else {
                None
            };
            Ok(FittedModel::Stacked(StackedModel { bases, meta }))
        }
    }
}

/// Fits every stage in order on explicit training data.
pub fn fit_on(
    spec: &PipelineSpec,
    config: &Configuration,
    data: &TrainingData,
    seed: u64,
) -> Result<FittedPipeline, LearnerError> {
    let transform = fit_feature_stage(spec.fs, config, data)?;
    let source = transform.apply(&data.source_x);
    let target = transform.apply(&data.target_x);
    let selected_source = transfer_stage(spec.tl, config, &source, &target)?;
    let x = source.select_rows(&selected_source).vstack(&target);
    let y: Vec<u8> = selected_source.iter().map(|&i| data.source_y[i]).chain(data.target_y.iter().copied()).collect();
    let model = fit_model(&spec.clf, config, &x, &y, seed)?;
    Ok(FittedPipeline {
        spec: spec.clone(),
        transform,
        selected_source,
        model,
        feature_count: data.source_x.cols(),
    })
}

/// Fits on the bundle's sources and target training rows.
pub fn fit_pipeline(
    spec: &PipelineSpec,
    config: &Configuration,
    bundle: &DatasetBundle,
    seed: u64,
) -> Result<FittedPipeline, LearnerError> {
    fit_on(spec, config, &TrainingData::from_bundle(bundle), seed)
}

/// Positive-class scores in `[0, 1]` for raw (untransformed) rows.
pub fn predict_scores(fitted: &FittedPipeline, rows: &Matrix) -> Result<Vec<f64>, LearnerError> {
    if rows.cols() != fitted.feature_count {
        return Err(LearnerError::ShapeMismatch { expected: fitted.feature_count, got: rows.cols() });
    }
    let x = fitted.transform.apply(rows);
    Ok(match &fitted.model {
        FittedModel::Single(m) => m.predict_scores(&x),
        FittedModel::Stacked(m) => m.predict_scores(&x),
    })
}

impl FittedPipeline {
    pub fn predict_scores(&self, rows: &Matrix) -> Result<Vec<f64>, LearnerError> {
        predict_scores(self, rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossFlag {
    DegenerateTraining,
    SingleClassTest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutLoss {
    pub loss: f64,
    pub flag: Option<LossFlag>,
}

/// `1 - AUC` on the target test rows. Unfittable training sets score 1.
pub fn holdout_loss(
    spec: &PipelineSpec,
    config: &Configuration,
    bundle: &DatasetBundle,
    seed: u64,
) -> Result<HoldoutLoss, LearnerError> {
    match fit_pipeline(spec, config, bundle, seed) {
        Ok(fitted) => {
            let scores = fitted.predict_scores(&bundle.target_test.features)?;
            let (auc, single) = auc_or_half(&bundle.target_test.labels, &scores);
            Ok(HoldoutLoss { loss: 1.0 - auc, flag: single.then_some(LossFlag::SingleClassTest) })
        }
        Err(LearnerError::DegenerateTraining) => Ok(HoldoutLoss { loss: 1.0, flag: Some(LossFlag::DegenerateTraining) }),
        Err(e) => Err(e),
    }
}

/// Out-of-fold scores for the target training rows: each fold is predicted
/// by the pipeline fitted on the sources plus the remaining target rows.
pub fn oof_target_scores(
    spec: &PipelineSpec,
    config: &Configuration,
    data: &TrainingData,
    seed: u64,
) -> Result<Vec<f64>, LearnerError> {
    let n = data.target_y.len();
    let folds = stratified_folds(&data.target_y, OOF_FOLDS, seed);
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let mut scores = vec![0.5; n];
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let held: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        match fit_on(spec, config, &data.with_target_rows(&train), seed) {
            Ok(fitted) => {
                for (&i, s) in held.iter().zip(fitted.predict_scores(&data.target_x.select_rows(&held))?) {
                    scores[i] = s;
                }
            }
            Err(LearnerError::DegenerateTraining) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(scores)
}
