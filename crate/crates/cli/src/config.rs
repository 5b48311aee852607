use std::fmt;
use std::path::{Path, PathBuf};

use roman_sentiment::eval::{PipelineOptions, ZeroDivision};
use roman_sentiment::models::{
    ClassifierKind, ClassifierSpec, Hyperparams, KnnParams, LinearSvmParams, LogisticParams,
    MlpParams, NaiveBayesParams,
};
use roman_sentiment::preprocess::TokenizeOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Repeated seeded train/test splits.
    Repeated,
    /// k-fold cross-validation.
    Kfold,
}

/// A flat run manifest. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Falls back to the bundled list when unset.
    pub stopwords: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    pub has_header: bool,
    pub dedup: bool,
    pub skip_bad_rows: bool,
    pub strip_punctuation: bool,

    pub max_features: usize,
    pub protocol: Protocol,
    pub train_ratio: f64,
    pub runs: usize,
    pub k: usize,
    pub fit_on_all: bool,
    pub zero_division: ZeroDivision,
    /// Classifiers run by `compare` and by stages given no `--kind`.
    pub classifiers: Vec<ClassifierKind>,

    pub nb_alpha: f64,
    pub allow_missing_class: bool,
    pub lr_learning_rate: f64,
    pub lr_epochs: usize,
    pub lr_l2: f64,
    pub svm_learning_rate: f64,
    pub svm_epochs: usize,
    pub svm_c: f64,
    pub knn_k: usize,
    pub mlp_hidden_units: usize,
    pub mlp_learning_rate: f64,
    pub mlp_epochs: usize,
    pub mlp_batch_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let nb = NaiveBayesParams::default();
        let lr = LogisticParams::default();
        let svm = LinearSvmParams::default();
        let knn = KnnParams::default();
        let mlp = MlpParams::default();
        Self {
            dataset: None,
            stopwords: None,
            out: PathBuf::from("out"),
            seed: 0,
            has_header: false,
            dedup: true,
            skip_bad_rows: false,
            strip_punctuation: false,
            max_features: roman_sentiment::DEFAULT_MAX_FEATURES,
            protocol: Protocol::Repeated,
            train_ratio: 0.8,
            runs: 10,
            k: 10,
            fit_on_all: false,
            zero_division: ZeroDivision::Zero,
            classifiers: ClassifierKind::ALL.to_vec(),
            nb_alpha: nb.alpha,
            allow_missing_class: nb.allow_missing_class,
            lr_learning_rate: lr.learning_rate,
            lr_epochs: lr.epochs,
            lr_l2: lr.l2,
            svm_learning_rate: svm.learning_rate,
            svm_epochs: svm.epochs,
            svm_c: svm.c,
            knn_k: knn.k,
            mlp_hidden_units: mlp.hidden_units,
            mlp_learning_rate: mlp.learning_rate,
            mlp_epochs: mlp.epochs,
            mlp_batch_size: mlp.batch_size,
        }
    }
}

/// Invalid or unreadable configuration. Maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str, source: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            ConfigError(format!(
                "invalid config {}: {}",
                source.display(),
                e.message()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn spec(&self, kind: ClassifierKind) -> ClassifierSpec {
        let hyperparams = match kind {
            ClassifierKind::NaiveBayes => Hyperparams::NaiveBayes(NaiveBayesParams {
                alpha: self.nb_alpha,
                allow_missing_class: self.allow_missing_class,
            }),
            ClassifierKind::LogisticRegression => Hyperparams::LogisticRegression(LogisticParams {
                learning_rate: self.lr_learning_rate,
                epochs: self.lr_epochs,
                l2: self.lr_l2,
            }),
            ClassifierKind::LinearSvm => Hyperparams::LinearSvm(LinearSvmParams {
                learning_rate: self.svm_learning_rate,
                epochs: self.svm_epochs,
                c: self.svm_c,
            }),
            ClassifierKind::Knn => Hyperparams::Knn(KnnParams { k: self.knn_k }),
            ClassifierKind::Mlp => Hyperparams::Mlp(MlpParams {
                hidden_units: self.mlp_hidden_units,
                learning_rate: self.mlp_learning_rate,
                epochs: self.mlp_epochs,
                batch_size: self.mlp_batch_size,
            }),
        };
        ClassifierSpec::new(hyperparams, self.seed)
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            max_features: self.max_features,
            train_ratio: self.train_ratio,
            fit_on_all: self.fit_on_all,
            tokenize: TokenizeOptions {
                strip_punctuation: self.strip_punctuation,
            },
            zero_division: self.zero_division,
        }
    }

    /// Value checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError(msg));
        if self.max_features == 0 {
            return bad("max_features must be at least 1".into());
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return bad(format!(
                "train_ratio must lie in (0, 1), got {}",
                self.train_ratio
            ));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.classifiers.is_empty() {
            return bad("classifiers must name at least one classifier".into());
        }
        for kind in ClassifierKind::ALL {
            self.spec(kind)
                .hyperparams
                .validate()
                .map_err(|e| ConfigError(format!("{}: {e}", kind.as_str())))?;
        }
        Ok(())
    }

    pub fn require_dataset(&self) -> Result<&Path, ConfigError> {
        let path = self.dataset.as_deref().ok_or_else(|| {
            ConfigError("no dataset given (set `dataset` or pass --dataset)".into())
        })?;
        require_file(path, "dataset")?;
        Ok(path)
    }

    pub fn check_stopwords(&self) -> Result<(), ConfigError> {
        match &self.stopwords {
            Some(p) => require_file(p, "stop-word list"),
            None => Ok(()),
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), ConfigError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ConfigError(format!("{what} not found: {}", path.display())))
    }
}
