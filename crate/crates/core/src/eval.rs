//! Confusion matrices, derived metrics and the two evaluation protocols:
//! repeated seeded train/test splits and k-fold cross-validation.
//!
//! Matrix rows are true classes and columns are predictions, both in
//! class-code order (negative, neutral, positive).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Corpus, CorpusError, Sentiment};
use crate::features::{FeatureError, TfIdfModel};
use crate::models::{self, ClassifierSpec, ModelError};
use crate::preprocess::{self, PreprocessError, StopWordList, TokenizeOptions, TokenizedComment};
use crate::seed::derive_seed;

const K: usize = Sentiment::COUNT;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("truth has {truth} labels but predictions have {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no predictions to evaluate")]
    EmptyInput,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("runs must be at least 1")]
    InvalidRuns,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `cells[truth][predicted]`
    pub cells: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn from_cells(cells: [[u64; K]; K]) -> Self {
        Self { cells }
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|i| self.cells[i][i]).sum()
    }

    /// True-class supports.
    pub fn row_sums(&self) -> [u64; K] {
        self.cells.map(|row| row.iter().sum())
    }

    /// Prediction counts per class.
    pub fn column_sums(&self) -> [u64; K] {
        let mut out = [0; K];
        for row in &self.cells {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    pub fn record(&mut self, truth: Sentiment, predicted: Sentiment) {
        self.cells[truth.code()][predicted.code()] += 1;
    }

    /// Cell-wise sum.
    pub fn merged(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = *self;
        for i in 0..K {
            for j in 0..K {
                out.cells[i][j] += other.cells[i][j];
            }
        }
        out
    }

    /// Header `truth,negative,neutral,positive`, one row per true class.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["truth".to_string()];
        header.extend(Sentiment::ALL.iter().map(|s| s.to_string()));
        wtr.write_record(&header)?;
        for s in Sentiment::ALL {
            let mut row = vec![s.to_string()];
            row.extend(self.cells[s.code()].iter().map(u64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn confusion_matrix(truth: &[Sentiment], pred: &[Sentiment]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        cm.record(t, p);
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(EvalError::EmptyMatrix),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

/// Value substituted for precision or recall when its denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDivision {
    #[default]
    Zero,
    One,
}

impl ZeroDivision {
    fn value(self) -> f64 {
        match self {
            ZeroDivision::Zero => 0.0,
            ZeroDivision::One => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// The class was never predicted, so precision fell back to the policy.
    pub precision_undefined: bool,
    /// The class never occurs in the truth, so recall fell back to the policy.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Class-code order.
    pub per_class: [ClassMetrics; K],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub supports: [u64; K],
    pub zero_division: ZeroDivision,
}

impl MetricsReport {
    pub fn class(&self, s: Sentiment) -> &ClassMetrics {
        &self.per_class[s.code()]
    }

    /// True when any precision or recall hit a zero denominator.
    pub fn has_undefined(&self) -> bool {
        self.per_class
            .iter()
            .any(|c| c.precision_undefined || c.recall_undefined)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(cm: &ConfusionMatrix, zero_division: ZeroDivision) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let rows = cm.row_sums();
    let cols = cm.column_sums();
    let per_class: [ClassMetrics; K] = std::array::from_fn(|c| {
        let tp = cm.cells[c][c] as f64;
        let (precision, precision_undefined) = match cols[c] {
            0 => (zero_division.value(), true),
            n => (tp / n as f64, false),
        };
        let (recall, recall_undefined) = match rows[c] {
            0 => (zero_division.value(), true),
            n => (tp / n as f64, false),
        };
        ClassMetrics {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: rows[c],
            precision_undefined,
            recall_undefined,
        }
    });
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / K as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| f(c) * c.support as f64)
            .sum::<f64>()
            / total as f64
    };
    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        weighted_precision: weighted(|c| c.precision),
        weighted_recall: weighted(|c| c.recall),
        weighted_f1: weighted(|c| c.f1),
        supports: rows,
        per_class,
        zero_division,
    })
}

/// Knobs shared by both evaluation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub max_features: usize,
    /// Fraction of records used for training in a train/test split.
    pub train_ratio: f64,
    /// Fit the TF-IDF vocabulary on every document, test rows included.
    pub fit_on_all: bool,
    pub tokenize: TokenizeOptions,
    pub zero_division: ZeroDivision,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            max_features: crate::DEFAULT_MAX_FEATURES,
            train_ratio: 0.8,
            fit_on_all: false,
            tokenize: TokenizeOptions::default(),
            zero_division: ZeroDivision::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// Fits TF-IDF and the classifier on `train`, predicts `test`.
pub fn evaluate_partition(
    spec: &ClassifierSpec,
    docs: &[TokenizedComment],
    train: &[usize],
    test: &[usize],
    options: &PipelineOptions,
    model_seed: u64,
) -> Result<ConfusionMatrix> {
    let pick = |positions: &[usize]| -> Vec<TokenizedComment> {
        positions.iter().map(|&i| docs[i].clone()).collect()
    };
    let train_docs = pick(train);
    let test_docs = pick(test);
    let tfidf = if options.fit_on_all {
        TfIdfModel::fit(docs, options.max_features)?
    } else {
        TfIdfModel::fit(&train_docs, options.max_features)?
    };
    let x_train = tfidf.transform_corpus(&train_docs);
    let x_test = tfidf.transform_corpus(&test_docs);
    let model = models::fit(&spec.with_seed(model_seed), &x_train)?;
    let predicted = model.predict_matrix(&x_test)?;
    confusion_matrix(&x_test.labels, &predicted)
}

/// Seeds derived from one run seed: the split and the classifier each get
/// their own stream.
pub fn split_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, "split")
}

pub fn train_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, "train")
}

pub fn kfold_seed(seed: u64) -> u64 {
    derive_seed(seed, "kfold")
}

fn outcome(seed: u64, confusion: ConfusionMatrix, options: &PipelineOptions) -> Result<RunOutcome> {
    Ok(RunOutcome {
        seed,
        metrics: metrics(&confusion, options.zero_division)?,
        confusion,
    })
}

/// One seeded train/test run on already-preprocessed documents.
pub fn evaluate_once_docs(
    spec: &ClassifierSpec,
    docs: &[TokenizedComment],
    options: &PipelineOptions,
    seed: u64,
) -> Result<RunOutcome> {
    let (train, test) = corpus::split_indices(docs.len(), options.train_ratio, split_seed(seed))?;
    let cm = evaluate_partition(spec, docs, &train, &test, options, train_seed(seed))?;
    outcome(seed, cm, options)
}

/// Preprocess → split → TF-IDF → train → predict → score.
pub fn evaluate_once(
    spec: &ClassifierSpec,
    c: &Corpus,
    sw: &StopWordList,
    options: &PipelineOptions,
    seed: u64,
) -> Result<RunOutcome> {
    let docs = preprocess::preprocess_corpus(c, sw, options.tokenize)?;
    evaluate_once_docs(spec, &docs, options, seed)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self::default();
        }
        if values.iter().all(|v| *v == values[0]) {
            return Self {
                mean: values[0],
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: MeanStd,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    pub weighted_precision: MeanStd,
    pub weighted_recall: MeanStd,
    pub weighted_f1: MeanStd,
}

impl MetricSummary {
    pub const NAMES: [&'static str; 7] = [
        "accuracy",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "weighted_precision",
        "weighted_recall",
        "weighted_f1",
    ];

    fn extract(report: &MetricsReport) -> [f64; 7] {
        [
            report.accuracy,
            report.macro_precision,
            report.macro_recall,
            report.macro_f1,
            report.weighted_precision,
            report.weighted_recall,
            report.weighted_f1,
        ]
    }

    pub fn of(reports: &[MetricsReport]) -> Self {
        let cols: Vec<[f64; 7]> = reports.iter().map(Self::extract).collect();
        let stat = |i: usize| MeanStd::of(&cols.iter().map(|c| c[i]).collect::<Vec<_>>());
        Self {
            accuracy: stat(0),
            macro_precision: stat(1),
            macro_recall: stat(2),
            macro_f1: stat(3),
            weighted_precision: stat(4),
            weighted_recall: stat(5),
            weighted_f1: stat(6),
        }
    }

    /// `(name, stats)` pairs in [`Self::NAMES`] order.
    pub fn entries(&self) -> [(&'static str, MeanStd); 7] {
        let v = [
            self.accuracy,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.weighted_precision,
            self.weighted_recall,
            self.weighted_f1,
        ];
        std::array::from_fn(|i| (Self::NAMES[i], v[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub per_run: Vec<MetricsReport>,
    pub confusions: Vec<ConfusionMatrix>,
    pub summary: MetricSummary,
}

impl RunAggregate {
    fn from_outcomes(outcomes: Vec<RunOutcome>) -> Self {
        let per_run: Vec<MetricsReport> = outcomes.iter().map(|o| o.metrics.clone()).collect();
        Self {
            runs: outcomes.len(),
            seeds: outcomes.iter().map(|o| o.seed).collect(),
            summary: MetricSummary::of(&per_run),
            confusions: outcomes.iter().map(|o| o.confusion).collect(),
            per_run,
        }
    }

    /// Cell-wise sum of the per-run matrices.
    pub fn pooled(&self) -> ConfusionMatrix {
        self.confusions
            .iter()
            .fold(ConfusionMatrix::default(), |acc, cm| acc.merged(cm))
    }
}

/// Runs with seeds `base_seed .. base_seed + runs`.
pub fn evaluate_repeated_docs(
    spec: &ClassifierSpec,
    docs: &[TokenizedComment],
    options: &PipelineOptions,
    runs: usize,
    base_seed: u64,
) -> Result<RunAggregate> {
    if runs == 0 {
        return Err(EvalError::InvalidRuns);
    }
    let outcomes = (0..runs as u64)
        .into_par_iter()
        .map(|i| evaluate_once_docs(spec, docs, options, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunAggregate::from_outcomes(outcomes))
}

pub fn evaluate_repeated(
    spec: &ClassifierSpec,
    c: &Corpus,
    sw: &StopWordList,
    options: &PipelineOptions,
    runs: usize,
    base_seed: u64,
) -> Result<RunAggregate> {
    if runs == 0 {
        return Err(EvalError::InvalidRuns);
    }
    let docs = preprocess::preprocess_corpus(c, sw, options.tokenize)?;
    evaluate_repeated_docs(spec, &docs, options, runs, base_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    /// One entry per fold; fold `i` trains with seed `train_seed(seed + i)`.
    pub aggregate: RunAggregate,
    pub pooled: ConfusionMatrix,
    pub fold_sizes: Vec<usize>,
}

pub fn cross_validate_docs(
    spec: &ClassifierSpec,
    docs: &[TokenizedComment],
    k: usize,
    options: &PipelineOptions,
    seed: u64,
) -> Result<CrossValidation> {
    let folds = corpus::kfold_indices(docs.len(), k, kfold_seed(seed))?;
    let outcomes = folds
        .par_iter()
        .enumerate()
        .map(|(i, test)| {
            let run_seed = seed.wrapping_add(i as u64);
            let train = corpus::complement(docs.len(), test);
            let cm = evaluate_partition(spec, docs, &train, test, options, train_seed(run_seed))?;
            outcome(run_seed, cm, options)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = RunAggregate::from_outcomes(outcomes);
    Ok(CrossValidation {
        pooled: aggregate.pooled(),
        fold_sizes: folds.iter().map(Vec::len).collect(),
        aggregate,
    })
}

pub fn cross_validate(
    spec: &ClassifierSpec,
    c: &Corpus,
    sw: &StopWordList,
    k: usize,
    options: &PipelineOptions,
    seed: u64,
) -> Result<CrossValidation> {
    if k < 2 || k > c.len() {
        return Err(CorpusError::KOutOfRange { k, n: c.len() }.into());
    }
    let docs = preprocess::preprocess_corpus(c, sw, options.tokenize)?;
    cross_validate_docs(spec, &docs, k, options, seed)
}
