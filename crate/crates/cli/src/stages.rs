use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use roman_sentiment::corpus::{self, Corpus, LoadOptions, LoadReport, Sentiment};
use roman_sentiment::eval::{self, ConfusionMatrix, CrossValidation, MetricsReport, RunAggregate};
use roman_sentiment::features::{self, TfIdfModel};
use roman_sentiment::models::{self, ClassifierKind, Hyperparams, TrainedModel};
use roman_sentiment::preprocess::{self, StopWordList, TokenizedComment};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Protocol, RunConfig};
use crate::report;

pub const CORPUS: &str = "corpus.csv";
pub const LABELS: &str = "label_distribution.json";
pub const PREPROCESSED: &str = "preprocessed.csv";
pub const SPLIT: &str = "split.json";
pub const TFIDF: &str = "tfidf.json";
pub const WORD_FREQUENCY: &str = "word_frequency.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const RANKING: &str = "ranking.txt";

pub fn model_file(kind: ClassifierKind) -> String {
    format!("model_{kind}.json")
}

pub fn predictions_file(kind: ClassifierKind) -> String {
    format!("predictions_{kind}.csv")
}

pub fn stage_metrics_file(kind: ClassifierKind) -> String {
    format!("metrics_{kind}.json")
}

pub fn confusion_file(kind: ClassifierKind) -> String {
    format!("confusion_{kind}.csv")
}

/// Path of an artifact an earlier stage should have written.
fn predecessor(cfg: &RunConfig, name: &str, producer: &str) -> Result<PathBuf> {
    let path = cfg.out.join(name);
    if !path.is_file() {
        bail!(
            "missing predecessor artifact {} (run `{producer}` first)",
            path.display()
        );
    }
    Ok(path)
}

/// Buffered file outputs, written together once every computation succeeded.
#[derive(Default)]
struct Outputs(Vec<(String, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.0.push((name.into(), bytes.into()));
    }

    fn commit(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, bytes) in self.0 {
            let path = dir.join(&name);
            let mut w = BufWriter::new(
                File::create(&path).with_context(|| format!("creating {}", path.display()))?,
            );
            w.write_all(&bytes)?;
            w.flush()?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn load_options(cfg: &RunConfig) -> LoadOptions {
    LoadOptions {
        has_header: cfg.has_header,
        dedup: cfg.dedup,
        skip_bad_rows: cfg.skip_bad_rows,
    }
}

fn stopwords(cfg: &RunConfig) -> Result<StopWordList> {
    Ok(match &cfg.stopwords {
        Some(p) => preprocess::load_stopwords(p)?,
        None => StopWordList::builtin(),
    })
}

fn report_skips(report: &LoadReport) {
    for (line, reason) in &report.skipped_rows {
        eprintln!("skipped line {line}: {reason}");
    }
}

#[derive(Serialize)]
struct LabelReport<'a> {
    source: &'a str,
    records: usize,
    duplicates_removed: usize,
    skipped_rows: usize,
    classes: std::collections::BTreeMap<Sentiment, corpus::ClassShare>,
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let path = cfg.require_dataset()?;
    let (c, load) = corpus::load_csv_with_report(path, &load_options(cfg))?;
    report_skips(&load);
    let labels = LabelReport {
        source: &c.source_path,
        records: c.len(),
        duplicates_removed: load.duplicates_removed,
        skipped_rows: load.skipped_rows.len(),
        classes: corpus::label_distribution(&c)?,
    };
    let mut csv = Vec::new();
    c.write_csv(&mut csv)?;
    let mut out = Outputs::default();
    out.add(CORPUS, csv);
    out.add(LABELS, report::report_json(&labels)?);
    out.commit(&cfg.out)
}

fn read_staged_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = predecessor(cfg, CORPUS, "ingest")?;
    let opts = LoadOptions {
        has_header: true,
        dedup: false,
        skip_bad_rows: false,
    };
    Ok(corpus::load_csv(&path, &opts)?)
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let c = read_staged_corpus(cfg)?;
    let docs =
        preprocess::preprocess_corpus(&c, &stopwords(cfg)?, cfg.pipeline_options().tokenize)?;
    let mut csv = Vec::new();
    preprocess::write_preprocessed_csv(&c, &docs, &mut csv)?;
    let mut out = Outputs::default();
    out.add(PREPROCESSED, csv);
    out.commit(&cfg.out)
}

fn read_preprocessed(cfg: &RunConfig) -> Result<Vec<TokenizedComment>> {
    let path = predecessor(cfg, PREPROCESSED, "preprocess")?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let (_, docs) =
        preprocess::read_preprocessed_csv(BufReader::new(file), &path.display().to_string())?;
    Ok(docs)
}

/// Row ids of the train and test sides of a seeded split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub split_seed: u64,
    pub train_ratio: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn fit_features(cfg: &RunConfig) -> Result<()> {
    let docs = read_preprocessed(cfg)?;
    let split_seed = eval::split_seed(cfg.seed);
    let (train, test) = corpus::split_indices(docs.len(), cfg.train_ratio, split_seed)?;
    let fit_docs: Vec<&TokenizedComment> = if cfg.fit_on_all {
        docs.iter().collect()
    } else {
        train.iter().map(|&i| &docs[i]).collect()
    };
    let token_lists: Vec<&[String]> = fit_docs.iter().map(|d| d.tokens.as_slice()).collect();
    let tfidf = TfIdfModel::fit(&token_lists, cfg.max_features)?;
    let split = SplitFile {
        seed: cfg.seed,
        split_seed,
        train_ratio: cfg.train_ratio,
        train: train.iter().map(|&i| docs[i].row_id).collect(),
        test: test.iter().map(|&i| docs[i].row_id).collect(),
    };
    let mut freq = Vec::new();
    features::write_word_frequency_csv(&features::word_frequencies(&token_lists), &mut freq)?;

    let mut out = Outputs::default();
    out.add(SPLIT, serde_json::to_string_pretty(&split)? + "\n");
    out.add(TFIDF, tfidf.to_json()? + "\n");
    out.add(WORD_FREQUENCY, freq);
    out.commit(&cfg.out)
}

struct FeatureStage {
    docs: Vec<TokenizedComment>,
    split: SplitFile,
    tfidf: TfIdfModel,
}

impl FeatureStage {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let docs = read_preprocessed(cfg)?;
        let split_path = predecessor(cfg, SPLIT, "fit-features")?;
        let tfidf_path = predecessor(cfg, TFIDF, "fit-features")?;
        let split: SplitFile = serde_json::from_str(&fs::read_to_string(&split_path)?)
            .with_context(|| format!("parsing {}", split_path.display()))?;
        let tfidf = TfIdfModel::from_json(&fs::read_to_string(&tfidf_path)?)
            .with_context(|| format!("loading {}", tfidf_path.display()))?;
        if let Some(&bad) = split
            .train
            .iter()
            .chain(&split.test)
            .find(|&&i| i >= docs.len())
        {
            bail!(
                "{} refers to row {bad}, but {PREPROCESSED} has {} rows",
                split_path.display(),
                docs.len()
            );
        }
        Ok(Self { docs, split, tfidf })
    }

    fn pick(&self, ids: &[usize]) -> Vec<TokenizedComment> {
        ids.iter().map(|&i| self.docs[i].clone()).collect()
    }
}

fn kinds(cfg: &RunConfig) -> &[ClassifierKind] {
    &cfg.classifiers
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let stage = FeatureStage::load(cfg)?;
    let x = stage
        .tfidf
        .transform_corpus(&stage.pick(&stage.split.train));
    let mut out = Outputs::default();
    for &kind in kinds(cfg) {
        let spec = cfg.spec(kind).with_seed(eval::train_seed(cfg.seed));
        let model = models::fit(&spec, &x).with_context(|| format!("training {kind}"))?;
        out.add(model_file(kind), model.to_json() + "\n");
    }
    out.commit(&cfg.out)
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let stage = FeatureStage::load(cfg)?;
    let test_docs = stage.pick(&stage.split.test);
    let x = stage.tfidf.transform_corpus(&test_docs);
    let mut out = Outputs::default();
    for &kind in kinds(cfg) {
        let path = predecessor(cfg, &model_file(kind), "train")?;
        let model = TrainedModel::from_json(&fs::read_to_string(&path)?)
            .with_context(|| format!("loading {}", path.display()))?;
        let predicted = model.predict_matrix(&x)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row_id", "truth", "predicted"])?;
        for ((doc, truth), pred) in test_docs.iter().zip(&x.labels).zip(&predicted) {
            w.write_record([
                doc.row_id.to_string().as_str(),
                truth.as_str(),
                pred.as_str(),
            ])?;
        }
        out.add(predictions_file(kind), w.into_inner()?);
    }
    out.commit(&cfg.out)
}

fn read_predictions(path: &Path) -> Result<(Vec<Sentiment>, Vec<Sentiment>)> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            bail!("{}:{line}: expected 3 fields", path.display());
        }
        let parse = |s: &str| {
            s.parse::<Sentiment>()
                .with_context(|| format!("{}:{line}", path.display()))
        };
        truth.push(parse(&row[1])?);
        pred.push(parse(&row[2])?);
    }
    Ok((truth, pred))
}

#[derive(Serialize)]
struct StageMetrics {
    classifier: ClassifierKind,
    confusion: ConfusionMatrix,
    metrics: MetricsReport,
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let mut out = Outputs::default();
    for &kind in kinds(cfg) {
        let path = predecessor(cfg, &predictions_file(kind), "predict")?;
        let (truth, pred) = read_predictions(&path)?;
        let confusion = eval::confusion_matrix(&truth, &pred)?;
        let metrics = eval::metrics(&confusion, cfg.zero_division)?;
        let report = StageMetrics {
            classifier: kind,
            confusion,
            metrics,
        };
        out.add(stage_metrics_file(kind), report::report_json(&report)?);
    }
    out.commit(&cfg.out)
}

#[derive(Serialize)]
struct ClassifierReport {
    hyperparams: Hyperparams,
    #[serde(flatten)]
    aggregate: RunAggregate,
    pooled: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    fold_sizes: Option<Vec<usize>>,
}

pub fn compare(cfg: &RunConfig) -> Result<()> {
    let path = cfg.require_dataset()?;
    let (c, load) = corpus::load_csv_with_report(path, &load_options(cfg))?;
    report_skips(&load);
    let opts = cfg.pipeline_options();
    let docs = preprocess::preprocess_corpus(&c, &stopwords(cfg)?, opts.tokenize)?;

    let mut results: Vec<(ClassifierKind, ClassifierReport)> = Vec::new();
    for &kind in kinds(cfg) {
        let spec = cfg.spec(kind);
        let report = match cfg.protocol {
            Protocol::Repeated => {
                let aggregate =
                    eval::evaluate_repeated_docs(&spec, &docs, &opts, cfg.runs, cfg.seed)
                        .with_context(|| format!("evaluating {kind}"))?;
                ClassifierReport {
                    hyperparams: spec.hyperparams,
                    pooled: aggregate.pooled(),
                    aggregate,
                    fold_sizes: None,
                }
            }
            Protocol::Kfold => {
                if cfg.k > docs.len() {
                    bail!(
                        "k = {} exceeds the {} records in the corpus",
                        cfg.k,
                        docs.len()
                    );
                }
                let CrossValidation {
                    aggregate,
                    pooled,
                    fold_sizes,
                } = eval::cross_validate_docs(&spec, &docs, cfg.k, &opts, cfg.seed)
                    .with_context(|| format!("cross-validating {kind}"))?;
                ClassifierReport {
                    hyperparams: spec.hyperparams,
                    aggregate,
                    pooled,
                    fold_sizes: Some(fold_sizes),
                }
            }
        };
        results.push((kind, report));
    }

    let protocol = match cfg.protocol {
        Protocol::Repeated => {
            json!({"name": "repeated", "runs": cfg.runs, "train_ratio": cfg.train_ratio})
        }
        Protocol::Kfold => json!({"name": "kfold", "k": cfg.k}),
    };
    let classifiers: serde_json::Map<String, serde_json::Value> = results
        .iter()
        .map(|(k, r)| Ok((k.as_str().to_string(), serde_json::to_value(r)?)))
        .collect::<Result<_>>()?;
    let document = json!({
        "records": c.len(),
        "duplicates_removed": load.duplicates_removed,
        "seed": cfg.seed,
        "protocol": protocol,
        "fit_on_all": cfg.fit_on_all,
        "max_features": cfg.max_features,
        "zero_division": cfg.zero_division,
        "classifiers": classifiers,
    });

    let summaries: Vec<_> = results
        .iter()
        .map(|(k, r)| (*k, &r.aggregate.summary))
        .collect();
    let mut metrics_csv = Vec::new();
    report::write_metrics_csv(&summaries, &mut metrics_csv)?;
    let aggregates: Vec<_> = results.iter().map(|(k, r)| (*k, &r.aggregate)).collect();
    let ranking = report::ranking_table(&report::ranking(&aggregates));

    let mut out = Outputs::default();
    out.add(METRICS_JSON, report::report_json(&document)?);
    out.add(METRICS_CSV, metrics_csv);
    for (kind, r) in &results {
        let mut buf = Vec::new();
        r.pooled.write_csv(&mut buf)?;
        out.add(confusion_file(*kind), buf);
    }
    out.add(RANKING, ranking.clone());
    out.commit(&cfg.out)?;
    print!("{ranking}");
    Ok(())
}
