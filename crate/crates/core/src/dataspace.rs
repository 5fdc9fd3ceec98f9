//! Defect datasets: CSV ingestion, source/target bundles, standardization and
//! a synthetic cross-project generator.

use std::fmt;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: String, reason: String },
    #[error("non-numeric cell at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize },
    #[error("bad label at row {0} (expected 0 or 1)")]
    BadLabel(usize),
    #[error("project {0}: {1}")]
    InvalidProject(String, String),
    #[error("unknown target project {0:?}")]
    UnknownTarget(String),
    #[error("target project has {0} rows, at least 10 are required")]
    TargetTooSmall(usize),
    #[error("target project contains a single class")]
    SingleClassTarget,
    #[error("feature count mismatch: {0} has {1} columns, expected {2}")]
    FeatureCountMismatch(String, usize, usize),
    #[error("invalid synthetic parameters: {0}")]
    InvalidSynthParams(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Dense row-major matrix of reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(idx.len(), self.cols, data)
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for r in self.iter_rows() {
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Matrix::new(self.rows, idx.len(), data)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix::new(self.rows + other.rows, self.cols, data)
    }

    pub fn map_rows<F: FnMut(&[f64]) -> Vec<f64>>(&self, out_cols: usize, mut f: F) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * out_cols);
        for r in self.iter_rows() {
            let v = f(r);
            debug_assert_eq!(v.len(), out_cols);
            data.extend(v);
        }
        Matrix::new(self.rows, out_cols, data)
    }
}

/// One software project: a metric matrix plus binary defect labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectData {
    pub name: String,
    pub features: Matrix,
    /// 1 = defective.
    pub labels: Vec<u8>,
}

impl ProjectData {
    pub fn new(name: impl Into<String>, features: Matrix, labels: Vec<u8>) -> Result<Self, DataError> {
        let name = name.into();
        if features.rows() != labels.len() {
            return Err(DataError::InvalidProject(
                name,
                format!("{} rows but {} labels", features.rows(), labels.len()),
            ));
        }
        if labels.len() < 2 {
            return Err(DataError::InvalidProject(name, "fewer than 2 rows".into()));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonNumericCell { row: pos / features.cols().max(1) + 1, col: pos % features.cols().max(1) + 1 });
        }
        if let Some(row) = labels.iter().position(|&l| l > 1) {
            return Err(DataError::BadLabel(row + 1));
        }
        Ok(Self { name, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    fn subset(&self, name: String, idx: &[usize]) -> ProjectData {
        ProjectData {
            name,
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Reads a project from CSV. The last column must be named `label`.
///
/// Row numbers in errors count data rows from 1; column numbers from 1.
pub fn load_project_csv(path: impl AsRef<Path>) -> Result<ProjectData, DataError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let malformed = |reason: &str| DataError::MalformedHeader {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if header.len() < 2 {
        return Err(malformed("need at least one metric column and a label column"));
    }
    if header.iter().next_back().map(str::trim) != Some("label") {
        return Err(malformed("last column must be named \"label\""));
    }
    let n_feat = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(DataError::NonNumericCell { row, col: record.len().min(header.len()) + 1 });
        }
        for (c, cell) in record.iter().take(n_feat).enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| DataError::NonNumericCell { row, col: c + 1 })?;
            if !v.is_finite() {
                return Err(DataError::NonNumericCell { row, col: c + 1 });
            }
            data.push(v);
        }
        let label = match record.get(n_feat).map(str::trim) {
            Some("0") => 0u8,
            Some("1") => 1u8,
            _ => return Err(DataError::BadLabel(row)),
        };
        labels.push(label);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "project".into());
    let rows = labels.len();
    ProjectData::new(name, Matrix::new(rows, n_feat, data), labels)
}

/// Writes a project as CSV with `m1..mD` metric headers and a trailing `label`.
pub fn write_project_csv(project: &ProjectData, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let mut header: Vec<String> = (1..=project.feature_count()).map(|j| format!("m{j}")).collect();
    header.push("label".into());
    writeln!(out, "{}", header.join(","))?;
    for (row, label) in project.features.iter_rows().zip(&project.labels) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{},{}", cells.join(","), label)?;
    }
    out.flush()?;
    Ok(())
}

/// Source projects plus a train/test split of the target project.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub source: Vec<ProjectData>,
    pub target_train: ProjectData,
    pub target_test: ProjectData,
    pub feature_count: usize,
    /// Row indices of the original target project, in train order.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl DatasetBundle {
    /// All source rows stacked, in project order.
    pub fn source_stack(&self) -> (Matrix, Vec<u8>) {
        let mut m = Matrix::zeros(0, self.feature_count);
        let mut y = Vec::new();
        for p in &self.source {
            m = m.vstack(&p.features);
            y.extend_from_slice(&p.labels);
        }
        (m, y)
    }

    pub fn source_rows(&self) -> usize {
        self.source.iter().map(ProjectData::len).sum()
    }
}

impl fmt::Display for DatasetBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} sources ({} rows), target {} train / {} test, {} features",
            self.source.len(),
            self.source_rows(),
            self.target_train.len(),
            self.target_test.len(),
            self.feature_count
        )
    }
}

/// Picks `target` out of `projects`, shuffles its rows with `seed` and puts the
/// first `ceil(train_fraction * n)` rows into the training split.
///
/// If the training split ends up missing a class, the first test row of that
/// class is swapped with the last training row of the over-represented class.
pub fn make_bundle(
    projects: &[ProjectData],
    target: &str,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetBundle, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidProject(target.into(), format!("train fraction {train_fraction} not in (0,1)")));
    }
    let tgt = projects
        .iter()
        .find(|p| p.name == target)
        .ok_or_else(|| DataError::UnknownTarget(target.to_string()))?;
    let feature_count = tgt.feature_count();
    for p in projects {
        if p.feature_count() != feature_count {
            return Err(DataError::FeatureCountMismatch(p.name.clone(), p.feature_count(), feature_count));
        }
    }
    let n = tgt.len();
    if n < 10 {
        return Err(DataError::TargetTooSmall(n));
    }
    if !tgt.has_both_classes() {
        return Err(DataError::SingleClassTarget);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split", 0));
    let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let (mut train, mut test) = (order[..n_train].to_vec(), order[n_train..].to_vec());

    for class in [0u8, 1u8] {
        if !train.iter().any(|&i| tgt.labels[i] == class) {
            let t = test.iter().position(|&i| tgt.labels[i] == class).expect("target has both classes");
            let last = train.len() - 1;
            std::mem::swap(&mut train[last], &mut test[t]);
        }
    }

    let source = projects.iter().filter(|p| p.name != target).cloned().collect();
    Ok(DatasetBundle {
        source,
        target_train: tgt.subset(format!("{}_train", tgt.name), &train),
        target_test: tgt.subset(format!("{}_test", tgt.name), &test),
        feature_count,
        train_rows: train,
        test_rows: test,
    })
}

/// Per-column mean and sample standard deviation used for z-scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    /// Fits on every row of the given matrices.
    pub fn fit<'a>(parts: impl IntoIterator<Item = &'a Matrix>, cols: usize) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; cols];
        let parts: Vec<&Matrix> = parts.into_iter().collect();
        for m in &parts {
            for r in m.iter_rows() {
                n += 1;
                for (s, v) in sum.iter_mut().zip(r) {
                    *s += v;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n.max(1) as f64).collect();
        let mut ss = vec![0.0; cols];
        for m in &parts {
            for r in m.iter_rows() {
                for ((s, v), mu) in ss.iter_mut().zip(r).zip(&mean) {
                    *s += (v - mu) * (v - mu);
                }
            }
        }
        let std = ss.iter().map(|s| if n > 1 { (s / (n - 1) as f64).sqrt() } else { 0.0 }).collect();
        Self { mean, std }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        m.map_rows(m.cols(), |r| {
            r.iter()
                .enumerate()
                .map(|(j, &v)| {
                    // zero-variance columns stay as they are
                    if self.std[j] > 1e-12 {
                        (v - self.mean[j]) / self.std[j]
                    } else {
                        v
                    }
                })
                .collect()
        })
    }
}

/// Z-scores every partition with statistics fitted on sources plus target
/// train rows. Target test rows never influence the statistics.
pub fn zscore_fit_apply(bundle: &DatasetBundle) -> DatasetBundle {
    let fit_parts = bundle.source.iter().map(|p| &p.features).chain(std::iter::once(&bundle.target_train.features));
    let z = ZScore::fit(fit_parts, bundle.feature_count);
    let tr = |p: &ProjectData| ProjectData { features: z.apply(&p.features), ..p.clone() };
    DatasetBundle {
        source: bundle.source.iter().map(tr).collect(),
        target_train: tr(&bundle.target_train),
        target_test: tr(&bundle.target_test),
        ..bundle.clone()
    }
}

/// Distance between the two class means in the synthetic generator, in units of
/// the within-class standard deviation.
pub const SYNTH_CLASS_SEPARATION: f64 = 2.2;
/// Fraction of defective rows in each synthetic project.
pub const SYNTH_POSITIVE_RATE: f64 = 0.3;

/// Generates `n_source_projects` source projects named `src0..` plus one
/// project named `target`, each with `n_rows` rows.
///
/// Both classes are unit-variance Gaussian clouds separated along one random
/// direction shared by all projects. Every project is translated by its own
/// random vector of length `shift`.
pub fn synth_cpdp(
    n_source_projects: usize,
    n_rows: usize,
    n_features: usize,
    shift: f64,
    seed: u64,
) -> Result<Vec<ProjectData>, DataError> {
    if n_source_projects < 1 || n_rows < 20 || n_features < 2 || !(shift >= 0.0 && shift.is_finite()) {
        return Err(DataError::InvalidSynthParams(format!(
            "projects={n_source_projects} rows={n_rows} features={n_features} shift={shift}"
        )));
    }
    let mut g = rng::stream(seed, "synth", 0);
    let direction = random_unit(&mut g, n_features);
    let n_pos = ((SYNTH_POSITIVE_RATE * n_rows as f64).round() as usize).clamp(1, n_rows - 1);

    let mut out = Vec::with_capacity(n_source_projects + 1);
    for p in 0..=n_source_projects {
        let offset: Vec<f64> = random_unit(&mut g, n_features).into_iter().map(|v| v * shift).collect();
        let mut labels: Vec<u8> = (0..n_rows).map(|i| u8::from(i < n_pos)).collect();
        labels.shuffle(&mut g);
        let mut data = Vec::with_capacity(n_rows * n_features);
        for &y in &labels {
            let sign = if y == 1 { 0.5 } else { -0.5 };
            for j in 0..n_features {
                let noise: f64 = StandardNormal.sample(&mut g);
                data.push(offset[j] + sign * SYNTH_CLASS_SEPARATION * direction[j] + noise);
            }
        }
        let name = if p == n_source_projects { "target".to_string() } else { format!("src{p}") };
        out.push(ProjectData::new(name, Matrix::new(n_rows, n_features, data), labels)?);
    }
    Ok(out)
}

fn random_unit<R: Rng>(g: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(g)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
