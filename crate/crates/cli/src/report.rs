//! Report formatting: every float in a report is rounded to 6 decimal places.

use std::io::Write;

use anyhow::Result;
use roman_sentiment::eval::{MetricSummary, RunAggregate};
use roman_sentiment::models::ClassifierKind;
use serde::Serialize;
use serde_json::Value;

pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Rounds every non-integer number in `v` in place.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n
                .as_f64()
                .map(round6)
                .and_then(serde_json::Number::from_f64)
            {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn report_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

pub fn write_metrics_csv<W: Write>(
    rows: &[(ClassifierKind, &MetricSummary)],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["classifier", "metric", "mean", "std"])?;
    for (kind, summary) in rows {
        for (name, ms) in summary.entries() {
            w.write_record([
                kind.as_str(),
                name,
                &format!("{:.6}", ms.mean),
                &format!("{:.6}", ms.std),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Classifiers by descending mean accuracy, ties by name.
pub fn ranking(
    results: &[(ClassifierKind, &RunAggregate)],
) -> Vec<(ClassifierKind, f64, f64, f64)> {
    let mut rows: Vec<_> = results
        .iter()
        .map(|(k, agg)| {
            let s = &agg.summary;
            (
                *k,
                round6(s.accuracy.mean),
                round6(s.accuracy.std),
                round6(s.macro_f1.mean),
            )
        })
        .collect();
    rows.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.as_str().cmp(b.0.as_str()))
    });
    rows
}

pub fn ranking_table(rows: &[(ClassifierKind, f64, f64, f64)]) -> String {
    let mut out = format!(
        "{:<5} {:<20} {:>13} {:>12} {:>13}\n",
        "rank", "classifier", "accuracy_mean", "accuracy_std", "macro_f1_mean"
    );
    for (i, (kind, mean, std, f1)) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{:<5} {:<20} {:>13.6} {:>12.6} {:>13.6}\n",
            i + 1,
            kind.as_str(),
            mean,
            std,
            f1
        ));
    }
    out
}
