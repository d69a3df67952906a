//! Label files in the layout used by public anomaly benchmarks.
//!
//! Accepted shapes, either bare or as an object keyed by data file path:
//!
//! - a list of timestamps, each marking one anomalous point;
//! - a list of `[start, end]` pairs, each an inclusive anomaly window.

use std::path::Path;

use lstm_evt_core::series::parse_timestamp;
use lstm_evt_core::TimeSeries;
use serde_json::Value;

use crate::error::{CliError, Stage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSpec {
    Points(Vec<i64>),
    Windows(Vec<(i64, i64)>),
}

fn bad(message: impl Into<String>) -> CliError {
    CliError::Data {
        stage: Stage::Load,
        message: message.into(),
    }
}

fn timestamp(v: &Value) -> Result<i64, CliError> {
    match v {
        Value::String(s) => {
            parse_timestamp(s).ok_or_else(|| bad(format!("bad label timestamp `{s}`")))
        }
        Value::Number(n) => n
            .as_i64()
            .ok_or_else(|| bad(format!("label tick `{n}` is not an integer"))),
        other => Err(bad(format!("unexpected label entry {other}"))),
    }
}

fn parse_list(items: &[Value]) -> Result<LabelSpec, CliError> {
    if items.iter().all(|v| v.is_array()) {
        let windows = items
            .iter()
            .map(|w| match w.as_array().map(Vec::as_slice) {
                Some([s, e]) => {
                    let (s, e) = (timestamp(s)?, timestamp(e)?);
                    if e < s {
                        return Err(bad("label window ends before it starts"));
                    }
                    Ok((s, e))
                }
                _ => Err(bad("label windows must be [start, end] pairs")),
            })
            .collect::<Result<_, _>>()?;
        Ok(LabelSpec::Windows(windows))
    } else {
        Ok(LabelSpec::Points(
            items.iter().map(timestamp).collect::<Result<_, _>>()?,
        ))
    }
}

/// Parses a label document, choosing `key` or the entry whose key ends with
/// `file_name` when the document is keyed.
pub fn parse_labels(
    doc: &Value,
    key: Option<&str>,
    file_name: &str,
) -> Result<LabelSpec, CliError> {
    match doc {
        Value::Array(items) => parse_list(items),
        Value::Object(map) => {
            let entry = match key {
                Some(k) => map
                    .get(k)
                    .ok_or_else(|| bad(format!("label key `{k}` not found")))?,
                None => {
                    let mut hits = map.iter().filter(|(k, _)| {
                        Path::new(k.as_str()).file_name().and_then(|f| f.to_str())
                            == Some(file_name)
                    });
                    match (hits.next(), hits.next()) {
                        (Some((_, v)), None) => v,
                        (None, _) => return Err(bad(format!("no labels for `{file_name}`"))),
                        (Some(_), Some(_)) => {
                            return Err(bad(format!("several label entries match `{file_name}`")))
                        }
                    }
                }
            };
            match entry {
                Value::Array(items) => parse_list(items),
                _ => Err(bad("label entry must be a list")),
            }
        }
        _ => Err(bad("label file must hold a list or an object")),
    }
}

pub fn load_labels(
    path: &Path,
    key: Option<&str>,
    data_path: &Path,
) -> Result<LabelSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let file_name = data_path
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or_default();
    parse_labels(&doc, key, file_name)
}

/// Marks labeled indices on the series. Point labels must hit a timestamp.
pub fn apply_labels(series: TimeSeries, spec: &LabelSpec) -> Result<TimeSeries, CliError> {
    match spec {
        LabelSpec::Windows(w) => Ok(series.with_label_windows(w)),
        LabelSpec::Points(points) => {
            let mut labels = series.label_set();
            for t in points {
                let i = series
                    .timestamps
                    .binary_search(t)
                    .map_err(|_| bad(format!("label timestamp {t} is not in the series")))?;
                labels.insert(i);
            }
            let mut s = series;
            s.labels = Some(labels);
            Ok(s)
        }
    }
}
