mod config;
mod report;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use roman_sentiment::models::ClassifierKind;

use config::{ConfigError, Protocol, RunConfig};

/// Roman Urdu sentiment pipeline: ingest, preprocess, featurize, train and
/// compare five classifiers.
#[derive(Debug, Parser)]
#[command(name = "roman-sentiment", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run manifest; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for stage artifacts and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    protocol: Option<Protocol>,
    /// Fit the TF-IDF vocabulary on all records, test rows included.
    #[arg(long, global = true)]
    fit_on_all: bool,
    #[arg(long, global = true)]
    skip_bad_rows: bool,
    #[arg(long, global = true)]
    allow_missing_class: bool,
    /// The dataset's first row is a header.
    #[arg(long, global = true)]
    has_header: bool,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    #[arg(long, global = true)]
    max_features: Option<usize>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Restrict to one classifier; repeatable. Defaults to the configured list.
    #[arg(long = "kind", global = true, value_parser = parse_kind)]
    kinds: Vec<ClassifierKind>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and deduplicate the dataset; write corpus.csv and label_distribution.json.
    Ingest,
    /// Lowercase, tokenize and remove stop words; write preprocessed.csv.
    Preprocess,
    /// Split and fit TF-IDF; write split.json, tfidf.json and word_frequency.csv.
    FitFeatures,
    /// Train on the split's training rows; write model_<kind>.json.
    Train,
    /// Predict the split's test rows; write predictions_<kind>.csv.
    Predict,
    /// Score predictions; write metrics_<kind>.json.
    Evaluate,
    /// Run every classifier under the configured protocol and write reports.
    Compare,
}

fn parse_kind(s: &str) -> Result<ClassifierKind, String> {
    s.parse()
        .map_err(|e: roman_sentiment::models::ModelError| e.to_string())
}

fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.protocol {
        cfg.protocol = v;
    }
    if let Some(v) = &cli.dataset {
        cfg.dataset = Some(v.clone());
    }
    if let Some(v) = &cli.stopwords {
        cfg.stopwords = Some(v.clone());
    }
    if let Some(v) = cli.max_features {
        cfg.max_features = v;
    }
    if let Some(v) = cli.runs {
        cfg.runs = v;
    }
    if let Some(v) = cli.k {
        cfg.k = v;
    }
    cfg.fit_on_all |= cli.fit_on_all;
    cfg.skip_bad_rows |= cli.skip_bad_rows;
    cfg.allow_missing_class |= cli.allow_missing_class;
    cfg.has_header |= cli.has_header;
    if !cli.kinds.is_empty() {
        cfg.classifiers = cli.kinds.clone();
    }
    cfg.validate()?;
    match cli.command {
        Command::Ingest | Command::Compare => {
            cfg.require_dataset()?;
        }
        _ => {}
    }
    if matches!(cli.command, Command::Preprocess | Command::Compare) {
        cfg.check_stopwords()?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    match cli.command {
        Command::Ingest => stages::ingest(&cfg),
        Command::Preprocess => stages::preprocess(&cfg),
        Command::FitFeatures => stages::fit_features(&cfg),
        Command::Train => stages::train(&cfg),
        Command::Predict => stages::predict(&cfg),
        Command::Evaluate => stages::evaluate(&cfg),
        Command::Compare => stages::compare(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
