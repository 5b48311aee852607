//! Sentiment classification for Roman Urdu comments.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! 1. [`corpus`]: load the labelled CSV, deduplicate, report the label
//!    distribution and produce seeded train/test splits or k folds.
//! 2. [`preprocess`]: lowercase, whitespace-tokenize and remove stop words.
//! 3. [`features`]: fit a capped TF-IDF vocabulary and emit l2-normalized
//!    sparse vectors.
//! 4. [`models`]: multinomial Naive Bayes, softmax logistic regression,
//!    one-vs-rest linear SVM, cosine KNN and a one-hidden-layer MLP behind a
//!    single fit/predict surface.
//! 5. [`eval`]: confusion matrices, precision/recall/F1, repeated
//!    train/test runs and k-fold cross-validation.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod models;
pub mod preprocess;
pub mod seed;

pub use corpus::{Corpus, LabeledComment, Sentiment, SplitResult};
pub use eval::{ConfusionMatrix, MetricsReport, RunAggregate};
pub use features::{FeatureMatrix, SparseVector, TfIdfModel, Vocabulary};
pub use models::{ClassifierKind, ClassifierSpec, Hyperparams, ScoreVector, TrainedModel};
pub use preprocess::{StopWordList, TokenizedComment};

/// Default cap on the TF-IDF vocabulary size.
pub const DEFAULT_MAX_FEATURES: usize = 3000;
