//! The five classifiers behind one fit/score/predict surface.
//!
//! | kind                  | scores returned by [`TrainedModel::decision_scores`] |
//! |-----------------------|-------------------------------------------------------|
//! | `naive_bayes`         | class posteriors                                      |
//! | `logistic_regression` | softmax probabilities                                 |
//! | `linear_svm`          | raw one-vs-rest decision values                       |
//! | `knn`                 | vote fractions among the k neighbours                 |
//! | `mlp`                 | softmax probabilities                                 |
//!
//! Every model serializes to a self-describing JSON document tagged by
//! `kind`, so a model can be trained in one process and used in another.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentiment;
use crate::features::{FeatureMatrix, SparseVector};

pub mod knn;
pub mod logistic;
pub mod mlp;
pub mod naive_bayes;
pub mod svm;

pub use knn::{KnnModel, KnnParams};
pub use logistic::{LogisticModel, LogisticParams};
pub use mlp::{MlpModel, MlpParams};
pub use naive_bayes::{NaiveBayesModel, NaiveBayesParams};
pub use svm::{LinearSvmModel, LinearSvmParams};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("training data is empty")]
    EmptyTraining,
    #[error("class(es) {0:?} absent from the training labels")]
    MissingClass(Vec<Sentiment>),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("k = {k} out of range for {n} training rows")]
    KOutOfRange { k: usize, n: usize },
    #[error("vector dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown classifier kind {0:?}")]
    UnknownKind(String),
    #[error("invalid model document: {0}")]
    InvalidModel(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    NaiveBayes,
    LogisticRegression,
    LinearSvm,
    Knn,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::NaiveBayes,
        ClassifierKind::LogisticRegression,
        ClassifierKind::LinearSvm,
        ClassifierKind::Knn,
        ClassifierKind::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "naive_bayes",
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Mlp => "mlp",
        }
    }

    /// Whether [`TrainedModel::decision_scores`] returns a distribution.
    pub fn is_probabilistic(self) -> bool {
        matches!(
            self,
            ClassifierKind::NaiveBayes | ClassifierKind::LogisticRegression | ClassifierKind::Mlp
        )
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::UnknownKind(s.to_string()))
    }
}

/// Hyperparameters for one classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparams {
    NaiveBayes(NaiveBayesParams),
    LogisticRegression(LogisticParams),
    LinearSvm(LinearSvmParams),
    Knn(KnnParams),
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::NaiveBayes => Self::NaiveBayes(Default::default()),
            ClassifierKind::LogisticRegression => Self::LogisticRegression(Default::default()),
            ClassifierKind::LinearSvm => Self::LinearSvm(Default::default()),
            ClassifierKind::Knn => Self::Knn(Default::default()),
            ClassifierKind::Mlp => Self::Mlp(Default::default()),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            Self::LogisticRegression(_) => ClassifierKind::LogisticRegression,
            Self::LinearSvm(_) => ClassifierKind::LinearSvm,
            Self::Knn(_) => ClassifierKind::Knn,
            Self::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::NaiveBayes(p) => p.validate(),
            Self::LogisticRegression(p) => p.validate(),
            Self::LinearSvm(p) => p.validate(),
            Self::Knn(p) => p.validate(),
            Self::Mlp(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(hyperparams: Hyperparams, seed: u64) -> Self {
        Self { hyperparams, seed }
    }

    pub fn default_for(kind: ClassifierKind) -> Self {
        Self::new(Hyperparams::default_for(kind), 0)
    }

    pub fn kind(&self) -> ClassifierKind {
        self.hyperparams.kind()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            hyperparams: self.hyperparams.clone(),
            seed,
        }
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidHyperparameter(format!(
            "{name} must be > 0, got {value}"
        )))
    }
}

pub(crate) fn check_non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidHyperparameter(format!(
            "{name} must be >= 0, got {value}"
        )))
    }
}

/// Per-class scores in class-code order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector(pub [f64; Sentiment::COUNT]);

impl ScoreVector {
    /// Highest score; ties go to the lowest class code.
    pub fn argmax(&self) -> Sentiment {
        let mut best = 0;
        for c in 1..Sentiment::COUNT {
            if self.0[c] > self.0[best] {
                best = c;
            }
        }
        Sentiment::ALL[best]
    }

    pub fn get(&self, s: Sentiment) -> f64 {
        self.0[s.code()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    /// Objective after each epoch, starting with the initial parameters.
    /// Not persisted.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

/// Numerically stable softmax over class logits.
pub(crate) fn softmax(logits: &[f64; Sentiment::COUNT]) -> [f64; Sentiment::COUNT] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|z| (z - max).exp());
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// `-ln p[label]` computed from logits without forming `p`.
pub(crate) fn cross_entropy(logits: &[f64; Sentiment::COUNT], label: Sentiment) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label.code()]
}

pub(crate) fn ensure_non_empty(x: &FeatureMatrix) -> Result<()> {
    if x.is_empty() {
        Err(ModelError::EmptyTraining)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    NaiveBayes(NaiveBayesModel),
    LogisticRegression(LogisticModel),
    LinearSvm(LinearSvmModel),
    Knn(KnnModel),
    Mlp(MlpModel),
}

/// Trains the classifier described by `spec` on `x`.
pub fn fit(spec: &ClassifierSpec, x: &FeatureMatrix) -> Result<TrainedModel> {
    spec.hyperparams.validate()?;
    Ok(match &spec.hyperparams {
        Hyperparams::NaiveBayes(p) => TrainedModel::NaiveBayes(NaiveBayesModel::fit(x, p)?),
        Hyperparams::LogisticRegression(p) => {
            TrainedModel::LogisticRegression(LogisticModel::fit(x, p, spec.seed)?)
        }
        Hyperparams::LinearSvm(p) => TrainedModel::LinearSvm(LinearSvmModel::fit(x, p, spec.seed)?),
        Hyperparams::Knn(p) => TrainedModel::Knn(KnnModel::fit(x, p)?),
        Hyperparams::Mlp(p) => TrainedModel::Mlp(MlpModel::fit(x, p, spec.seed)?),
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            Self::LogisticRegression(_) => ClassifierKind::LogisticRegression,
            Self::LinearSvm(_) => ClassifierKind::LinearSvm,
            Self::Knn(_) => ClassifierKind::Knn,
            Self::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::NaiveBayes(m) => m.dimension,
            Self::LogisticRegression(m) => m.dimension,
            Self::LinearSvm(m) => m.dimension,
            Self::Knn(m) => m.dimension,
            Self::Mlp(m) => m.dimension,
        }
    }

    pub fn training_meta(&self) -> &TrainingMeta {
        match self {
            Self::NaiveBayes(m) => &m.training_meta,
            Self::LogisticRegression(m) => &m.training_meta,
            Self::LinearSvm(m) => &m.training_meta,
            Self::Knn(m) => &m.training_meta,
            Self::Mlp(m) => &m.training_meta,
        }
    }

    fn check_dimension(&self, v: &SparseVector) -> Result<()> {
        if v.dimension() == self.dimension() {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch {
                expected: self.dimension(),
                got: v.dimension(),
            })
        }
    }

    pub fn decision_scores(&self, v: &SparseVector) -> Result<ScoreVector> {
        self.check_dimension(v)?;
        Ok(ScoreVector(match self {
            Self::NaiveBayes(m) => m.posterior(v),
            Self::LogisticRegression(m) => m.probabilities(v),
            Self::LinearSvm(m) => m.decision_values(v),
            Self::Knn(m) => m.vote_fractions(v),
            Self::Mlp(m) => m.probabilities(v),
        }))
    }

    /// Argmax of the decision scores with ties to the lowest class code.
    /// KNN resolves vote ties by its nearest tied neighbour instead.
    pub fn predict(&self, v: &SparseVector) -> Result<Sentiment> {
        self.check_dimension(v)?;
        match self {
            Self::Knn(m) => Ok(m.predict(v)),
            _ => self.decision_scores(v).map(|s| s.argmax()),
        }
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<Sentiment>> {
        x.rows.par_iter().map(|v| self.predict(v)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel =
            serde_json::from_str(text).map_err(|e| ModelError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::NaiveBayes(m) => m.validate(),
            Self::LogisticRegression(m) => m.validate(),
            Self::LinearSvm(m) => m.validate(),
            Self::Knn(m) => m.validate(),
            Self::Mlp(m) => m.validate(),
        }
    }
}

pub(crate) fn check_shape(
    name: &str,
    rows: &[Vec<f64>],
    n_rows: usize,
    n_cols: usize,
) -> Result<()> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(ModelError::InvalidModel(format!(
            "{name} must be {n_rows}x{n_cols}"
        )));
    }
    check_finite(name, rows.iter().flatten())
}

pub(crate) fn check_finite<'a>(
    name: &str,
    values: impl IntoIterator<Item = &'a f64>,
) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::InvalidModel(format!(
            "{name} contains non-finite values"
        )))
    }
}
