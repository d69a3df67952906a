//! On-disk artifacts exchanged between stages. Every write goes to a
//! temporary file in the target directory and is renamed into place.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use lstm_evt_core::forecaster::read_external_errors;
use lstm_evt_core::series::SplitBoundaries;
use lstm_evt_core::ErrorSeries;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AtStage, CliError, Stage};

pub const CONFIG: &str = "config.json";
pub const SPLIT: &str = "split.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const ERRORS: &str = "errors.csv";
pub const PREDICTIONS: &str = "predictions.csv";
pub const TESTS: &str = "tests.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TABLE: &str = "metrics.txt";
pub const PLOT: &str = "plot.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Gaussian,
    Evt,
    Tukey,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Gaussian, Rule::Evt, Rule::Tukey];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Gaussian => "gaussian",
            Rule::Evt => "evt",
            Rule::Tukey => "tukey",
        }
    }

    pub fn fit_file(self) -> String {
        format!("{}_fit.json", self.name())
    }

    pub fn detections_file(self) -> String {
        format!("detections_{}.csv", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Split boundaries and what the loader saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub series_name: String,
    pub len: usize,
    pub rejected_rows: usize,
    pub train_end: usize,
    pub validation_end: usize,
    pub labeled_points: LabelCounts,
}

impl SplitManifest {
    pub fn boundaries(&self) -> SplitBoundaries {
        SplitBoundaries {
            train_end: self.train_end,
            validation_end: self.validation_end,
            len: self.len,
        }
    }
}

/// One row of a detection file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub index: usize,
    pub score: f64,
    pub flagged: u8,
}

pub fn flags_of(rows: &[DetectionRow]) -> BTreeSet<usize> {
    rows.iter()
        .filter(|r| r.flagged == 1)
        .map(|r| r.index)
        .collect()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

#[derive(Serialize)]
struct ErrorRow {
    index: usize,
    error: f64,
}

pub fn write_errors(path: &Path, errors: &ErrorSeries) -> Result<(), CliError> {
    let rows: Vec<ErrorRow> = errors
        .iter()
        .map(|(index, error)| ErrorRow { index, error })
        .collect();
    write_csv(path, &rows)
}

pub fn read_errors(path: &Path) -> Result<ErrorSeries, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_external_errors(file).at(Stage::Errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub index: usize,
    pub predicted: f64,
}
