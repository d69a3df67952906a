//! Series ingestion, chronological splitting, windowing and prediction errors.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Univariate series with optional ground-truth anomaly labels.
///
/// Timestamps are integer ticks: either the integers found in the input or
/// seconds since the Unix epoch for ISO-8601 input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
    pub labels: Option<BTreeSet<usize>>,
}

impl TimeSeries {
    pub fn new(
        timestamps: Vec<i64>,
        values: Vec<f64>,
        labels: Option<BTreeSet<usize>>,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::ShapeMismatch {
                expected: timestamps.len(),
                actual: values.len(),
            });
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "timestamps must strictly increase (index {})",
                w + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at index {i}"
            )));
        }
        if let Some(labels) = &labels {
            if let Some(&bad) = labels.iter().find(|&&i| i >= values.len()) {
                return Err(Error::InvalidArgument(format!(
                    "label index {bad} out of range for series of length {}",
                    values.len()
                )));
            }
        }
        Ok(Self {
            timestamps,
            values,
            labels,
        })
    }

    /// Series with ticks `0..values.len()` and no labels.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let ts = (0..values.len() as i64).collect();
        Self::new(ts, values, None)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label_set(&self) -> BTreeSet<usize> {
        self.labels.clone().unwrap_or_default()
    }

    /// Contiguous sub-series `[start, end)` with labels re-indexed to the segment.
    pub fn segment(&self, start: usize, end: usize) -> TimeSeries {
        let labels = self.labels.as_ref().map(|l| {
            l.range(start..end)
                .map(|&i| i - start)
                .collect::<BTreeSet<_>>()
        });
        TimeSeries {
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
            labels,
        }
    }

    /// Marks every index whose timestamp falls inside one of the inclusive
    /// `[start, end]` windows as anomalous.
    pub fn with_label_windows(mut self, windows: &[(i64, i64)]) -> Self {
        let mut labels = self.labels.take().unwrap_or_default();
        for (i, &t) in self.timestamps.iter().enumerate() {
            if windows.iter().any(|&(s, e)| t >= s && t <= e) {
                labels.insert(i);
            }
        }
        self.labels = Some(labels);
        self
    }
}

/// Column names for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp: String,
    pub value: String,
    /// Label column (0/1). Ignored when the file has no such column.
    pub label: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            value: "value".into(),
            label: Some("label".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub series: TimeSeries,
    /// Rows dropped for a non-finite value or a repeated timestamp.
    pub rejected_rows: usize,
}

/// Parses an integer tick or an ISO-8601 instant into integer ticks.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(t) = raw.parse::<i64>() {
        return Some(t);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    for fmt in [
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Reads a series from any CSV source. See [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<LoadedSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let ts_col =
        col(&schema.timestamp).ok_or_else(|| Error::MissingColumn(schema.timestamp.clone()))?;
    let val_col = col(&schema.value).ok_or_else(|| Error::MissingColumn(schema.value.clone()))?;
    let label_col = schema.label.as_deref().and_then(col);

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut labels = BTreeSet::new();
    let mut rejected = 0;

    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_idx + 2;
        let raw_ts = record.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| Error::Parse {
            row,
            message: format!("unparseable timestamp `{raw_ts}`"),
        })?;
        let raw_val = record.get(val_col).unwrap_or("");
        let value: f64 = raw_val.parse().map_err(|_| Error::Parse {
            row,
            message: format!("unparseable value `{raw_val}`"),
        })?;
        if !value.is_finite() {
            rejected += 1;
            continue;
        }
        if let Some(&last) = timestamps.last() {
            if ts == last {
                rejected += 1;
                continue;
            }
            if ts < last {
                return Err(Error::Parse {
                    row,
                    message: "timestamps decrease".into(),
                });
            }
        }
        if let Some(lc) = label_col {
            let raw = record.get(lc).unwrap_or("0");
            let flag = match raw {
                "" | "0" | "0.0" | "false" => false,
                "1" | "1.0" | "true" => true,
                other => {
                    return Err(Error::Parse {
                        row,
                        message: format!("label must be 0 or 1, got `{other}`"),
                    })
                }
            };
            if flag {
                labels.insert(values.len());
            }
        }
        timestamps.push(ts);
        values.push(value);
    }

    if values.is_empty() {
        return Err(Error::Empty("no valid rows".into()));
    }
    let labels = label_col.map(|_| labels);
    Ok(LoadedSeries {
        series: TimeSeries::new(timestamps, values, labels)?,
        rejected_rows: rejected,
    })
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.5,
            validation_fraction: 0.25,
            test_fraction: 0.25,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let spec = Self {
            train_fraction: train,
            validation_fraction: validation,
            test_fraction: test,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let f = [
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
        ];
        if f.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in [0, 1]: {f:?}"
            )));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1: {f:?}"
            )));
        }
        Ok(())
    }
}

/// Segment boundaries in parent-series indices: train is `[0, train_end)`,
/// validation `[train_end, validation_end)`, test `[validation_end, len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBoundaries {
    pub train_end: usize,
    pub validation_end: usize,
    pub len: usize,
}

impl SplitBoundaries {
    pub fn train(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn validation(&self) -> std::ops::Range<usize> {
        self.train_end..self.validation_end
    }

    pub fn test(&self) -> std::ops::Range<usize> {
        self.validation_end..self.len
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: TimeSeries,
    pub validation: TimeSeries,
    pub test: TimeSeries,
    pub boundaries: SplitBoundaries,
}

/// Integer segment sizes; the remainder of the floor split goes to test.
pub fn split_boundaries(len: usize, spec: &SplitSpec) -> Result<SplitBoundaries> {
    spec.validate()?;
    if len < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            available: len,
        });
    }
    // The epsilon keeps 10·0.6 from flooring to 5 on inexact products.
    let n = len as f64;
    let train = ((n * spec.train_fraction) + 1e-9).floor() as usize;
    let val = ((n * spec.validation_fraction) + 1e-9).floor() as usize;
    let train_end = train.min(len);
    let validation_end = (train_end + val).min(len);
    Ok(SplitBoundaries {
        train_end,
        validation_end,
        len,
    })
}

/// Chronological split. Fails if the training segment holds a labeled anomaly.
pub fn split(series: &TimeSeries, spec: &SplitSpec) -> Result<Split> {
    let b = split_boundaries(series.len(), spec)?;
    if let Some(labels) = &series.labels {
        if let Some(&index) = labels.range(b.train()).next() {
            return Err(Error::AnomalyInTraining { index });
        }
    }
    Ok(Split {
        train: series.segment(0, b.train_end),
        validation: series.segment(b.train_end, b.validation_end),
        test: series.segment(b.validation_end, b.len),
        boundaries: b,
    })
}

/// Look-back inputs paired with look-ahead targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Parent index of each target's first element.
    pub origin_indices: Vec<usize>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

pub fn make_windows(values: &[f64], look_back: usize, look_ahead: usize) -> Result<WindowSet> {
    make_windows_strided(values, look_back, look_ahead, 1)
}

/// Like [`make_windows`] but keeps only every `stride`-th pair.
pub fn make_windows_strided(
    values: &[f64],
    look_back: usize,
    look_ahead: usize,
    stride: usize,
) -> Result<WindowSet> {
    if look_back == 0 || look_ahead == 0 || stride == 0 {
        return Err(Error::InvalidArgument(
            "look-back, look-ahead and stride must be positive".into(),
        ));
    }
    let span = look_back + look_ahead;
    if values.len() < span {
        return Err(Error::InsufficientData {
            required: span,
            available: values.len(),
        });
    }
    let count = values.len() - span + 1;
    let mut set = WindowSet {
        inputs: Vec::with_capacity(count / stride + 1),
        targets: Vec::with_capacity(count / stride + 1),
        origin_indices: Vec::with_capacity(count / stride + 1),
    };
    for start in (0..count).step_by(stride) {
        let origin = start + look_back;
        set.inputs.push(values[start..origin].to_vec());
        set.targets
            .push(values[origin..origin + look_ahead].to_vec());
        set.origin_indices.push(origin);
    }
    Ok(set)
}

/// Non-negative prediction errors keyed by parent-series index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub indices: Vec<usize>,
    pub errors: Vec<f64>,
}

impl ErrorSeries {
    pub fn new(indices: Vec<usize>, errors: Vec<f64>) -> Result<Self> {
        if indices.len() != errors.len() {
            return Err(Error::ShapeMismatch {
                expected: indices.len(),
                actual: errors.len(),
            });
        }
        if let Some(i) = errors.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "error at position {i} is not a finite non-negative value: {}",
                errors[i]
            )));
        }
        if let Some(w) = indices.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "error indices must strictly increase (position {})",
                w + 1
            )));
        }
        Ok(Self { indices, errors })
    }

    /// Errors with indices `0..n`.
    pub fn from_errors(errors: Vec<f64>) -> Result<Self> {
        Self::new((0..errors.len()).collect(), errors)
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// Entries whose parent index lies in `range`.
    pub fn restrict(&self, range: std::ops::Range<usize>) -> ErrorSeries {
        let lo = self.indices.partition_point(|&i| i < range.start);
        let hi = self.indices.partition_point(|&i| i < range.end);
        ErrorSeries {
            indices: self.indices[lo..hi].to_vec(),
            errors: self.errors[lo..hi].to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.errors.iter().copied())
    }
}

/// `|actual[i] - predicted[i]|` element-wise.
pub fn absolute_errors(actual: &[f64], predicted: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != predicted.len() {
        return Err(Error::ShapeMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .collect())
}

/// Errors at one forecast horizon for every window, indexed at
/// `origin + horizon` in the parent series.
pub fn horizon_errors(
    windows: &WindowSet,
    predictions: &[Vec<f64>],
    horizon: usize,
) -> Result<ErrorSeries> {
    if predictions.len() != windows.len() {
        return Err(Error::ShapeMismatch {
            expected: windows.len(),
            actual: predictions.len(),
        });
    }
    let look_ahead = windows.targets.first().map_or(0, Vec::len);
    if horizon >= look_ahead {
        return Err(Error::InvalidArgument(format!(
            "horizon index {horizon} must be below look-ahead {look_ahead}"
        )));
    }
    let actual: Vec<f64> = windows.targets.iter().map(|t| t[horizon]).collect();
    let predicted: Vec<f64> = predictions.iter().map(|p| p[horizon]).collect();
    let errors = absolute_errors(&actual, &predicted)?;
    let indices = windows.origin_indices.iter().map(|o| o + horizon).collect();
    ErrorSeries::new(indices, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema(ts: &str, v: &str) -> CsvSchema {
        CsvSchema {
            timestamp: ts.into(),
            value: v.into(),
            label: None,
        }
    }

    #[test]
    fn parses_three_rows() {
        let loaded = read_csv("t,v\n1,5.0\n2,6.0\n3,4.0".as_bytes(), &schema("t", "v")).unwrap();
        assert_eq!(loaded.series.len(), 3);
        assert_eq!(loaded.series.values, vec![5.0, 6.0, 4.0]);
        assert!(loaded.series.labels.is_none());
        assert_eq!(loaded.rejected_rows, 0);
    }

    #[test]
    fn rejects_nan_rows_with_count() {
        let loaded = read_csv("t,v\n1,5.0\n2,NaN\n3,4.0".as_bytes(), &schema("t", "v")).unwrap();
        assert_eq!(loaded.series.len(), 2);
        assert_eq!(loaded.rejected_rows, 1);
    }

    #[test]
    fn duplicate_timestamps_are_rejected_rows() {
        let loaded = read_csv("t,v\n1,5.0\n1,6.0\n3,4.0".as_bytes(), &schema("t", "v")).unwrap();
        assert_eq!(loaded.series.timestamps, vec![1, 3]);
        assert_eq!(loaded.rejected_rows, 1);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &CsvSchema::default()),
            Err(Error::Io { .. })
        ));
        assert!(matches!(
            read_csv("t,v\nabc,1.0".as_bytes(), &schema("t", "v")),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            read_csv("t,v\n1,x".as_bytes(), &schema("t", "v")),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            read_csv("t,v\n".as_bytes(), &schema("t", "v")),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            read_csv("t,w\n1,2".as_bytes(), &schema("t", "v")),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn iso_timestamps_and_labels() {
        let csv = "timestamp,value,label\n2015-09-08 11:39:00,73,0\n2015-09-08 11:44:00,71,1\n2015-09-08T11:49:00Z,70,0\n";
        let s = read_csv(csv.as_bytes(), &CsvSchema::default())
            .unwrap()
            .series;
        assert_eq!(s.timestamps[1] - s.timestamps[0], 300);
        assert_eq!(s.timestamps[2] - s.timestamps[1], 300);
        assert_eq!(s.labels, Some([1].into_iter().collect()));
    }

    #[test]
    fn label_windows_mark_indices() {
        let s = TimeSeries::from_values(vec![0.0; 10])
            .unwrap()
            .with_label_windows(&[(2, 4), (8, 8)]);
        assert_eq!(
            s.label_set().into_iter().collect::<Vec<_>>(),
            vec![2, 3, 4, 8]
        );
    }

    #[test]
    fn split_lengths() {
        let s = TimeSeries::from_values((0..10).map(f64::from).collect()).unwrap();
        let sp = split(&s, &SplitSpec::new(0.6, 0.2, 0.2).unwrap()).unwrap();
        assert_eq!(
            (sp.train.len(), sp.validation.len(), sp.test.len()),
            (6, 2, 2)
        );
    }

    #[test]
    fn split_remainder_goes_to_test() {
        // floor oracle: 2382·0.5 = 1191, ⌊2382·0.25⌋ = 595, remainder 596
        let n = 2382usize;
        let expect_train = n / 2;
        let expect_val = n / 4;
        let expect_test = n - expect_train - expect_val;
        let s = TimeSeries::from_values(vec![1.0; n]).unwrap();
        let sp = split(&s, &SplitSpec::default()).unwrap();
        assert_eq!(
            (sp.train.len(), sp.validation.len(), sp.test.len()),
            (expect_train, expect_val, expect_test)
        );
        assert_eq!((expect_train, expect_val, expect_test), (1191, 595, 596));
    }

    #[test]
    fn split_rejects_training_anomaly() {
        let s = TimeSeries::new(
            (0..10).collect(),
            vec![0.0; 10],
            Some([2].into_iter().collect()),
        )
        .unwrap();
        let err = split(&s, &SplitSpec::new(0.6, 0.2, 0.2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::AnomalyInTraining { index: 2 }));
        assert!(err.to_string().contains("anomaly in training segment"));
    }

    #[test]
    fn split_reindexes_labels() {
        let s = TimeSeries::new(
            (0..10).collect(),
            vec![0.0; 10],
            Some([7, 9].into_iter().collect()),
        )
        .unwrap();
        let sp = split(&s, &SplitSpec::new(0.6, 0.2, 0.2).unwrap()).unwrap();
        assert_eq!(
            sp.validation.label_set().into_iter().collect::<Vec<_>>(),
            vec![1]
        );
        assert_eq!(sp.test.label_set().into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::new(0.5, 0.3, 0.3).is_err());
        assert!(SplitSpec::new(-0.1, 0.6, 0.5).is_err());
        let s = TimeSeries::from_values(vec![1.0, 2.0]).unwrap();
        assert!(split(&s, &SplitSpec::default()).is_err());
    }

    #[test]
    fn windows_enumerate() {
        let w = make_windows(&[1.0, 2.0, 3.0, 4.0], 2, 1).unwrap();
        assert_eq!(w.inputs, vec![vec![1.0, 2.0], vec![2.0, 3.0]]);
        assert_eq!(w.targets, vec![vec![3.0], vec![4.0]]);
        assert_eq!(w.origin_indices, vec![2, 3]);
    }

    #[test]
    fn window_count() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(make_windows(&v, 8, 5).unwrap().len(), 100 - 8 - 5 + 1);
        assert!(matches!(
            make_windows(&v[..5], 4, 2),
            Err(Error::InsufficientData { .. })
        ));
        assert_eq!(make_windows_strided(&v, 8, 5, 10).unwrap().len(), 9);
    }

    #[test]
    fn absolute_error_examples() {
        assert_eq!(
            absolute_errors(&[3.0, 5.0], &[2.5, 6.0]).unwrap(),
            vec![0.5, 1.0]
        );
        assert_eq!(
            absolute_errors(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            absolute_errors(&[-1.0, 2.0], &[1.0, -2.0]).unwrap(),
            vec![2.0, 4.0]
        );
        assert!(absolute_errors(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn horizon_selection() {
        let w = make_windows(&[0.0, 1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        let preds = vec![vec![2.0, 2.0], vec![3.0, 3.0]];
        let e = horizon_errors(&w, &preds, 1).unwrap();
        assert_eq!(e.indices, vec![3, 4]);
        assert_eq!(e.errors, vec![1.0, 1.0]);
        assert!(horizon_errors(&w, &preds, 2).is_err());
    }

    #[test]
    fn error_series_invariants() {
        assert!(ErrorSeries::new(vec![0, 1], vec![0.5, -0.1]).is_err());
        assert!(ErrorSeries::new(vec![1, 1], vec![0.5, 0.1]).is_err());
        let e = ErrorSeries::new(vec![2, 5, 7, 9], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.restrict(5..9).indices, vec![5, 7]);
    }

    proptest! {
        #[test]
        fn split_then_concat_is_identity(
            values in prop::collection::vec(-1e6f64..1e6, 3..300),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let train = a * 0.9;
            let val = (1.0 - train) * b;
            let spec = SplitSpec { train_fraction: train, validation_fraction: val, test_fraction: 1.0 - train - val };
            let s = TimeSeries::from_values(values.clone()).unwrap();
            let sp = split(&s, &spec).unwrap();
            let joined: Vec<f64> = sp.train.values.iter().chain(&sp.validation.values).chain(&sp.test.values).copied().collect();
            prop_assert_eq!(joined, values);
        }

        #[test]
        fn windows_tile_parent(values in prop::collection::vec(-10.0f64..10.0, 2..80), lb in 1usize..6, la in 1usize..4) {
            prop_assume!(values.len() >= lb + la);
            let w = make_windows(&values, lb, la).unwrap();
            prop_assert_eq!(w.len(), values.len() - lb - la + 1);
            for i in 0..w.len() {
                let o = w.origin_indices[i];
                prop_assert_eq!(&w.inputs[i][..], &values[o - lb..o]);
                prop_assert_eq!(&w.targets[i][..], &values[o..o + la]);
            }
        }

        #[test]
        fn absolute_errors_symmetric(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 0..50)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ab = absolute_errors(&a, &b).unwrap();
            prop_assert!(ab.iter().all(|e| *e >= 0.0));
            prop_assert_eq!(ab, absolute_errors(&b, &a).unwrap());
        }
    }
}
