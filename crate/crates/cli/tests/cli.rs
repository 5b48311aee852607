use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use roman_sentiment::models::TrainedModel;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_roman-sentiment");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let o = run(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn toy_corpus(dir: &Path, n: usize) {
    let words = [
        ["bakwas", "bura", "ghatiya"],
        ["theek", "normal", "kal"],
        ["acha", "zabardast", "kamal"],
    ];
    let labels = ["Negative", "Neutral", "Positive"];
    let mut text = String::new();
    for i in 0..n {
        let c = i % 3;
        let w = words[c];
        text.push_str(&format!(
            "{} drama {} {} r{i},{},\n",
            w[i % 3],
            w[(i + 1) % 3],
            w[(i / 3) % 3],
            labels[c]
        ));
    }
    fs::write(dir.join("toy.csv"), text).unwrap();
}

#[test]
fn preprocess_adds_text_final_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("three.csv"),
        "\"acha drama\",Positive,nan\n\"bura show\",Negative,nan\n\"theek hai\",Neutral,nan\n",
    )
    .unwrap();
    fs::write(dir.path().join("sw.txt"), "hai\n").unwrap();
    ok(
        dir.path(),
        &["ingest", "--dataset", "three.csv", "--out", "o"],
    );
    ok(
        dir.path(),
        &["preprocess", "--stopwords", "sw.txt", "--out", "o"],
    );
    let text = fs::read_to_string(dir.path().join("o/preprocessed.csv")).unwrap();
    assert_eq!(
        text,
        "comment,sentiment,text_final\nacha drama,positive,acha drama\nbura show,negative,bura show\ntheek hai,neutral,theek\n"
    );
}

#[test]
fn staged_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path(), 60);
    let common = ["--out", "o", "--seed", "3"];
    ok(
        dir.path(),
        &[&["ingest", "--dataset", "toy.csv"][..], &common].concat(),
    );
    for stage in ["preprocess", "fit-features", "train", "predict", "evaluate"] {
        ok(dir.path(), &[&[stage][..], &common].concat());
    }
    let o = dir.path().join("o");
    let tfidf: Value =
        serde_json::from_str(&fs::read_to_string(o.join("tfidf.json")).unwrap()).unwrap();
    let dim = tfidf["terms"].as_array().unwrap().len();

    let svm: Value =
        serde_json::from_str(&fs::read_to_string(o.join("model_linear_svm.json")).unwrap())
            .unwrap();
    assert_eq!(svm["kind"], "linear_svm");
    let weights = svm["weights"].as_array().unwrap();
    assert_eq!(weights.len(), 3);
    assert!(weights.iter().all(|w| w.as_array().unwrap().len() == dim));

    let split: Value =
        serde_json::from_str(&fs::read_to_string(o.join("split.json")).unwrap()).unwrap();
    assert_eq!(split["train"].as_array().unwrap().len(), 48);
    let preds = fs::read_to_string(o.join("predictions_knn.csv")).unwrap();
    assert_eq!(preds.lines().next(), Some("row_id,truth,predicted"));
    assert_eq!(preds.lines().count(), 13);

    let metrics: Value =
        serde_json::from_str(&fs::read_to_string(o.join("metrics_mlp.json")).unwrap()).unwrap();
    assert_eq!(metrics["classifier"], "mlp");
    let total: u64 = metrics["confusion"]["cells"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|c| c.as_u64().unwrap()))
        .sum();
    assert_eq!(total, 12);

    // every model file reloads to an equal model
    for kind in [
        "naive_bayes",
        "logistic_regression",
        "linear_svm",
        "knn",
        "mlp",
    ] {
        let text = fs::read_to_string(o.join(format!("model_{kind}.json"))).unwrap();
        let m = TrainedModel::from_json(&text).unwrap();
        assert_eq!(m.to_json() + "\n", text);
    }
}

#[test]
fn rerunning_a_stage_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path(), 45);
    ok(
        dir.path(),
        &["ingest", "--dataset", "toy.csv", "--out", "o"],
    );
    ok(dir.path(), &["preprocess", "--out", "o"]);
    ok(dir.path(), &["fit-features", "--out", "o"]);
    ok(dir.path(), &["train", "--out", "o", "--kind", "mlp"]);
    let first = fs::read(dir.path().join("o/model_mlp.json")).unwrap();
    ok(dir.path(), &["train", "--out", "o", "--kind", "mlp"]);
    assert_eq!(
        first,
        fs::read(dir.path().join("o/model_mlp.json")).unwrap()
    );
}

#[test]
fn predict_without_model_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path(), 30);
    ok(
        dir.path(),
        &["ingest", "--dataset", "toy.csv", "--out", "o"],
    );
    ok(dir.path(), &["preprocess", "--out", "o"]);
    ok(dir.path(), &["fit-features", "--out", "o"]);
    let o = run(dir.path(), &["predict", "--out", "o", "--kind", "knn"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model_knn.json"), "{err}");
}

#[test]
fn compare_kfold_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path(), 30);
    ok(
        dir.path(),
        &[
            "compare",
            "--dataset",
            "toy.csv",
            "--out",
            "c",
            "--protocol",
            "kfold",
            "--k",
            "5",
        ],
    );
    let c = dir.path().join("c");
    for kind in [
        "naive_bayes",
        "logistic_regression",
        "linear_svm",
        "knn",
        "mlp",
    ] {
        let cm = fs::read_to_string(c.join(format!("confusion_{kind}.csv"))).unwrap();
        assert_eq!(cm.lines().next(), Some("truth,negative,neutral,positive"));
    }
    let metrics: Value =
        serde_json::from_str(&fs::read_to_string(c.join("metrics.json")).unwrap()).unwrap();
    let classifiers = metrics["classifiers"].as_object().unwrap();
    assert_eq!(classifiers.len(), 5);
    for entry in classifiers.values() {
        assert_eq!(entry["per_run"].as_array().unwrap().len(), 5);
        assert_eq!(entry["fold_sizes"], serde_json::json!([6, 6, 6, 6, 6]));
    }
    let csv = fs::read_to_string(c.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 7);

    let ranking = fs::read_to_string(c.join("ranking.txt")).unwrap();
    let rows: Vec<(String, f64)> = ranking
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[1].to_string(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(
            w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0),
            "{ranking}"
        );
    }
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path(), 30);
    fs::write(
        dir.path().join("run.toml"),
        "dataset = \"toy.csv\"\nmax_featurs = 10\n",
    )
    .unwrap();
    let o = run(dir.path(), &["compare", "--config", "run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_featurs"));
}

#[test]
fn config_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path(), 30);
    fs::write(
        dir.path().join("run.toml"),
        "dataset = \"toy.csv\"\nout = \"from_config\"\nruns = 2\nclassifiers = [\"naive_bayes\"]\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &["compare", "--config", "run.toml", "--out", "from_flag"],
    );
    assert!(!dir.path().join("from_config").exists());
    let metrics: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("from_flag/metrics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(metrics["protocol"]["runs"], 2);
    assert_eq!(metrics["classifiers"].as_object().unwrap().len(), 1);
}

#[test]
fn missing_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["ingest", "--dataset", "nope.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn malformed_rows_abort_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "acha,Positive\nbura,Angry\ntheek,Neutral\n",
    )
    .unwrap();
    let o = run(
        dir.path(),
        &["ingest", "--dataset", "bad.csv", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    ok(
        dir.path(),
        &[
            "ingest",
            "--dataset",
            "bad.csv",
            "--out",
            "o",
            "--skip-bad-rows",
        ],
    );
    let dist: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/label_distribution.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(dist["records"], 2);
    assert_eq!(dist["skipped_rows"], 1);
}
