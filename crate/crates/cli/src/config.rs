use std::path::{Path, PathBuf};

use lstm_evt_core::evt::{DEFAULT_LEVEL, DEFAULT_Q_GRID};
use lstm_evt_core::series::CsvSchema;
use lstm_evt_core::{ForecasterConfig, MatchSpec, SplitSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub schema: CsvSchema,
    /// Label file: JSON points or `[start, end]` windows, optionally keyed by
    /// data file name.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Key into a keyed label file; defaults to the entry matching the data
    /// file name.
    #[serde(default)]
    pub labels_key: Option<String>,
    /// Name used in reports; defaults to the data file stem.
    #[serde(default)]
    pub name: Option<String>,
}

impl DatasetConfig {
    pub fn series_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub enabled: bool,
    /// Fixed cut-off; tuned on validation labels when absent.
    #[serde(default)]
    pub tau_g: Option<f64>,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            tau_g: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvtConfig {
    pub enabled: bool,
    pub level: f64,
    pub q_grid: Vec<f64>,
    /// Fixed risk level; calibrated on the initialization stream when absent.
    #[serde(default)]
    pub q: Option<f64>,
}

impl Default for EvtConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            level: DEFAULT_LEVEL,
            q_grid: DEFAULT_Q_GRID.to_vec(),
            q: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TukeyConfig {
    pub enabled: bool,
    pub multiplier: f64,
}

impl Default for TukeyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            multiplier: lstm_evt_core::tukey::FAR_OUT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorsConfig {
    #[serde(default)]
    pub gaussian: GaussianConfig,
    #[serde(default)]
    pub evt: EvtConfig,
    #[serde(default)]
    pub tukey: TukeyConfig,
}

/// Which errors feed the normality test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorStream {
    #[default]
    All,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestsConfig {
    pub normality_stream: ErrorStream,
    pub bootstrap_resamples: usize,
    pub alpha: f64,
}

impl Default for TestsConfig {
    fn default() -> Self {
        Self {
            normality_stream: ErrorStream::All,
            bootstrap_resamples: 1999,
            alpha: lstm_evt_core::stattests::DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitSpec,
    /// Model to train. Exactly one of this and `external_errors` is set.
    #[serde(default)]
    pub forecaster: Option<ForecasterConfig>,
    /// Headerless `index,error` file replacing the trained model.
    #[serde(default)]
    pub external_errors: Option<PathBuf>,
    #[serde(default)]
    pub detectors: DetectorsConfig,
    #[serde(default)]
    pub tests: TestsConfig,
    #[serde(default)]
    pub matching: MatchSpec,
    pub output_dir: PathBuf,
    /// Seeds the forecaster (overriding its own field) and the bootstrap.
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.forecaster, &self.external_errors) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "set either a forecaster or external errors, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Usage(
                    "an error source is required: a forecaster or external errors".into(),
                ))
            }
            _ => {}
        }
        self.split
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(f) = &self.forecaster {
            f.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        let evt = &self.detectors.evt;
        if evt.q_grid.is_empty() && evt.q.is_none() {
            return Err(CliError::Usage("the q grid is empty".into()));
        }
        if !(evt.level > 0.0 && evt.level < 1.0) {
            return Err(CliError::Usage(format!(
                "quantile level {} outside (0, 1)",
                evt.level
            )));
        }
        if !(self.tests.alpha > 0.0 && self.tests.alpha < 1.0) {
            return Err(CliError::Usage(format!(
                "alpha {} outside (0, 1)",
                self.tests.alpha
            )));
        }
        Ok(())
    }

    /// Forecaster settings with the pipeline seed applied.
    pub fn seeded_forecaster(&self) -> Option<ForecasterConfig> {
        self.forecaster.clone().map(|f| ForecasterConfig {
            seed: self.seed,
            ..f
        })
    }

    /// Resolves the output directory against an optional root.
    pub fn with_output_root(mut self, root: Option<&Path>) -> Self {
        if let Some(root) = root {
            if self.output_dir.is_relative() {
                self.output_dir = root.join(&self.output_dir);
            }
        }
        self
    }
}

/// Overlays `patch` onto `base`: objects merge key by key, anything else is
/// replaced.
pub fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> PipelineConfig {
        serde_json::from_value(json!({
            "dataset": {"path": "d.csv"},
            "forecaster": ForecasterConfig::default(),
            "output_dir": "out"
        }))
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = minimal();
        assert_eq!(c.split, SplitSpec::default());
        assert_eq!(c.detectors.evt.q_grid, vec![1e-3, 1e-4, 1e-5]);
        assert_eq!(c.detectors.tukey.multiplier, 3.0);
        assert_eq!(c.dataset.series_name(), "d");
        c.validate().unwrap();
    }

    #[test]
    fn exactly_one_error_source() {
        let mut c = minimal();
        c.external_errors = Some("e.csv".into());
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        c.forecaster = None;
        c.validate().unwrap();
        c.external_errors = None;
        assert!(c.validate().is_err());
    }

    #[test]
    fn merge_overrides_nested_fields() {
        let mut base = json!({"a": {"b": 1, "c": 2}, "d": [1, 2]});
        merge_json(&mut base, json!({"a": {"c": 5}, "d": [9]}));
        assert_eq!(base, json!({"a": {"b": 1, "c": 5}, "d": [9]}));
    }

    #[test]
    fn output_root_applies_to_relative_dirs() {
        let c = minimal().with_output_root(Some(Path::new("/tmp/root")));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/root/out"));
        let mut abs = minimal();
        abs.output_dir = "/abs".into();
        assert_eq!(
            abs.with_output_root(Some(Path::new("/r"))).output_dir,
            PathBuf::from("/abs")
        );
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: Result<PipelineConfig, _> = serde_json::from_value(json!({
            "dataset": {"path": "d.csv"}, "output_dir": "o", "bogus": 1
        }));
        assert!(r.is_err());
    }
}
