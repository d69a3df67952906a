//! Command-line surface. Flags mirror [`PipelineConfig`] fields; a
//! `--config` file is applied on top of them.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lstm_evt_core::ForecasterConfig;
use serde_json::{json, Map, Value};

use crate::artifacts::Rule;
use crate::config::{merge_json, DetectorsConfig, PipelineConfig, TestsConfig};
use crate::error::CliError;
use crate::stages::Which;

pub const OUTPUT_ROOT_ENV: &str = "LSTM_EVT_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(
    name = "lstm-evt",
    version,
    about = "Prediction-error anomaly detection pipeline"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage and move the artifacts into the output directory.
    Pipeline(ConfigArgs),
    /// Load and split the dataset; writes config.json and split.json.
    Split(ConfigArgs),
    /// Train the forecaster; writes checkpoint.json and train_report.json.
    Train(DirArg),
    /// Compute prediction errors; writes errors.csv.
    Errors(DirArg),
    /// Fit one detection rule and flag the test segment.
    Detect {
        #[command(flatten)]
        dir: DirArg,
        #[arg(long, value_enum)]
        rule: RuleArg,
    },
    /// Normality and GPD goodness-of-fit tests; writes tests.json.
    Test {
        #[command(flatten)]
        dir: DirArg,
        #[arg(long, value_enum, default_values_t = [WhichArg::Sw, WhichArg::Ad])]
        which: Vec<WhichArg>,
    },
    /// Score detections; writes metrics.json and metrics.txt.
    Evaluate(DirArg),
    /// Write plot-ready CSV.
    Report(DirArg),
}

#[derive(Debug, Args)]
pub struct DirArg {
    /// Artifact directory created by `split`.
    #[arg(long)]
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Gaussian,
    Evt,
    Tukey,
}

impl From<RuleArg> for Rule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Gaussian => Rule::Gaussian,
            RuleArg::Evt => Rule::Evt,
            RuleArg::Tukey => Rule::Tukey,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichArg {
    Sw,
    Ad,
}

impl From<WhichArg> for Which {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Sw => Which::Sw,
            WhichArg::Ad => Which::Ad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StreamArg {
    All,
    Train,
}

#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// JSON config; its fields override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub timestamp_column: Option<String>,
    #[arg(long)]
    pub value_column: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// JSON label file (points or [start, end] windows).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub labels_key: Option<String>,
    #[arg(long)]
    pub name: Option<String>,

    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,

    /// Recurrent layer sizes, e.g. `60,30`.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub look_back: Option<usize>,
    #[arg(long)]
    pub look_ahead: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub horizon_index: Option<usize>,
    #[arg(long)]
    pub window_stride: Option<usize>,

    /// Headerless `index,error` CSV used instead of training a model.
    #[arg(long)]
    pub external_errors: Option<PathBuf>,

    #[arg(long)]
    pub no_gaussian: bool,
    /// Fixed log-density cut-off instead of validation tuning.
    #[arg(long, allow_hyphen_values = true)]
    pub tau_g: Option<f64>,
    #[arg(long)]
    pub no_evt: bool,
    /// Quantile level of the initial threshold.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub q_grid: Option<Vec<f64>>,
    /// Fixed risk level instead of calibration.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub no_tukey: bool,
    #[arg(long)]
    pub fence_multiplier: Option<f64>,

    #[arg(long, value_enum)]
    pub normality_stream: Option<StreamArg>,
    #[arg(long)]
    pub bootstrap_resamples: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Flags within this many steps of a label count as hits.
    #[arg(long)]
    pub tolerance: Option<usize>,
    /// Score every labeled point separately instead of per labeled run.
    #[arg(long)]
    pub point_labels: bool,

    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Root for a relative output directory.
    #[arg(long, env = OUTPUT_ROOT_ENV, hide_env_values = true)]
    pub output_root: Option<PathBuf>,
}

fn put<T: serde::Serialize>(obj: &mut Map<String, Value>, path: &[&str], v: Option<T>) {
    let Some(v) = v else { return };
    let mut cur = obj;
    for key in &path[..path.len() - 1] {
        cur = cur
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("flag paths only traverse objects");
    }
    cur.insert(
        path[path.len() - 1].to_string(),
        serde_json::to_value(v).expect("flag values serialize"),
    );
}

impl ConfigArgs {
    /// Flag values as a sparse config document.
    pub fn to_patch(&self) -> Value {
        let mut m = Map::new();
        let o = &mut m;
        put(o, &["dataset", "path"], self.data.as_ref());
        put(
            o,
            &["dataset", "schema", "timestamp"],
            self.timestamp_column.as_ref(),
        );
        put(
            o,
            &["dataset", "schema", "value"],
            self.value_column.as_ref(),
        );
        put(
            o,
            &["dataset", "schema", "label"],
            self.label_column.as_ref(),
        );
        put(o, &["dataset", "labels"], self.labels.as_ref());
        put(o, &["dataset", "labels_key"], self.labels_key.as_ref());
        put(o, &["dataset", "name"], self.name.as_ref());
        put(o, &["split", "train_fraction"], self.train_fraction);
        put(
            o,
            &["split", "validation_fraction"],
            self.validation_fraction,
        );
        put(o, &["split", "test_fraction"], self.test_fraction);
        put(
            o,
            &["forecaster", "recurrent_layer_sizes"],
            self.layers.as_ref(),
        );
        put(o, &["forecaster", "dropout_rate"], self.dropout);
        put(o, &["forecaster", "learning_rate"], self.learning_rate);
        put(o, &["forecaster", "look_back"], self.look_back);
        put(o, &["forecaster", "look_ahead"], self.look_ahead);
        put(o, &["forecaster", "max_epochs"], self.max_epochs);
        put(o, &["forecaster", "batch_size"], self.batch_size);
        put(o, &["forecaster", "early_stopping_patience"], self.patience);
        put(o, &["forecaster", "horizon_index"], self.horizon_index);
        put(o, &["forecaster", "window_stride"], self.window_stride);
        put(o, &["external_errors"], self.external_errors.as_ref());
        put(
            o,
            &["detectors", "gaussian", "enabled"],
            self.no_gaussian.then_some(false),
        );
        put(o, &["detectors", "gaussian", "tau_g"], self.tau_g);
        put(
            o,
            &["detectors", "evt", "enabled"],
            self.no_evt.then_some(false),
        );
        put(o, &["detectors", "evt", "level"], self.level);
        put(o, &["detectors", "evt", "q_grid"], self.q_grid.as_ref());
        put(o, &["detectors", "evt", "q"], self.q);
        put(
            o,
            &["detectors", "tukey", "enabled"],
            self.no_tukey.then_some(false),
        );
        put(
            o,
            &["detectors", "tukey", "multiplier"],
            self.fence_multiplier,
        );
        let stream = self.normality_stream.map(|s| match s {
            StreamArg::All => "all",
            StreamArg::Train => "train",
        });
        put(o, &["tests", "normality_stream"], stream);
        put(
            o,
            &["tests", "bootstrap_resamples"],
            self.bootstrap_resamples,
        );
        put(o, &["tests", "alpha"], self.alpha);
        put(o, &["matching", "tolerance"], self.tolerance);
        put(
            o,
            &["matching", "group_runs"],
            self.point_labels.then_some(false),
        );
        put(o, &["output_dir"], self.output_dir.as_ref());
        put(o, &["seed"], self.seed);
        Value::Object(m)
    }

    /// Defaults, then flags, then the config file.
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let file = match &self.config {
            Some(p) => Some(read_config_file(p)?),
            None => None,
        };
        resolve_config(self.to_patch(), file, self.output_root.as_deref())
    }
}

fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Merges flag and file documents over the defaults and deserializes.
///
/// A partial forecaster section is completed from the forecaster defaults.
/// With no error source at all, the default forecaster is used.
pub fn resolve_config(
    flags: Value,
    file: Option<Value>,
    output_root: Option<&Path>,
) -> Result<PipelineConfig, CliError> {
    let mut doc = json!({
        "split": lstm_evt_core::SplitSpec::default(),
        "detectors": DetectorsConfig::default(),
        "tests": TestsConfig::default(),
        "matching": lstm_evt_core::MatchSpec::default(),
        "seed": 0,
    });
    merge_json(&mut doc, flags);
    if let Some(f) = file {
        if !f.is_object() {
            return Err(CliError::Usage(
                "config file must hold a JSON object".into(),
            ));
        }
        merge_json(&mut doc, f);
    }
    let obj = doc.as_object_mut().expect("config document is an object");
    let has_external = obj.get("external_errors").is_some_and(|v| !v.is_null());
    match obj.get_mut("forecaster") {
        Some(f) if f.is_object() => {
            let mut full = serde_json::to_value(ForecasterConfig::default()).expect("serializable");
            merge_json(&mut full, f.take());
            *f = full;
        }
        Some(f) if f.is_null() && !has_external => {
            *f = serde_json::to_value(ForecasterConfig::default()).expect("serializable");
        }
        None if !has_external => {
            obj.insert(
                "forecaster".into(),
                serde_json::to_value(ForecasterConfig::default()).expect("serializable"),
            );
        }
        _ => {}
    }
    if !obj.contains_key("dataset") || obj["dataset"].get("path").is_none() {
        return Err(CliError::Usage(
            "a dataset path is required (--data)".into(),
        ));
    }
    if obj.get("output_dir").is_none_or(Value::is_null) {
        return Err(CliError::Usage(
            "an output directory is required (--output-dir)".into(),
        ));
    }
    let cfg: PipelineConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    let cfg = cfg.with_output_root(output_root);
    cfg.validate()?;
    Ok(cfg)
}
