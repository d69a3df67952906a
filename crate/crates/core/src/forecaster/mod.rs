//! Recurrent forecaster whose absolute prediction errors feed the detectors.
//!
//! Detectors never depend on this module directly: any [`ErrorSeries`],
//! including one read by [`load_external_errors`], can stand in for a
//! trained model.

mod gradcheck;
pub mod lstm;
mod train;

use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{horizon_errors, make_windows, ErrorSeries, TimeSeries};

pub use gradcheck::{gradient_check, loss_and_gradient};
pub use lstm::{Affine, LstmLayer, Network};
pub use train::{train, TrainReport};

fn default_horizon() -> usize {
    0
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterConfig {
    pub recurrent_layer_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub look_back: usize,
    pub look_ahead: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub early_stopping_patience: usize,
    pub seed: u64,
    /// Forecast horizon whose error feeds the detectors.
    #[serde(default = "default_horizon")]
    pub horizon_index: usize,
    /// Keep every `window_stride`-th training window.
    #[serde(default = "default_stride")]
    pub window_stride: usize,
}

impl Default for ForecasterConfig {
    fn default() -> Self {
        Self {
            recurrent_layer_sizes: vec![20],
            dropout_rate: 0.2,
            learning_rate: 0.01,
            look_back: 1,
            look_ahead: 1,
            max_epochs: 100,
            batch_size: 64,
            early_stopping_patience: 10,
            seed: 0,
            horizon_index: 0,
            window_stride: 1,
        }
    }
}

impl ForecasterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.recurrent_layer_sizes.is_empty() {
            return bad("at least one recurrent layer is required");
        }
        if self.recurrent_layer_sizes.contains(&0) {
            return bad("recurrent layer sizes must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.look_back == 0 || self.look_ahead == 0 {
            return bad("look-back and look-ahead must be positive");
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.early_stopping_patience == 0 {
            return bad("epochs, batch size and patience must be positive");
        }
        if self.horizon_index >= self.look_ahead {
            return bad("horizon index must be below look-ahead");
        }
        if self.window_stride == 0 {
            return bad("window stride must be positive");
        }
        Ok(())
    }
}

/// Min-max scaling fitted on training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub range: f64,
}

impl Default for MinMaxScaler {
    fn default() -> Self {
        Self {
            min: 0.0,
            range: 1.0,
        }
    }
}

impl MinMaxScaler {
    /// Maps the observed `[min, max]` to `[0, 1]`; a constant sample maps to 0.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !lo.is_finite() {
            return Self::default();
        }
        let range = hi - lo;
        Self {
            min: lo,
            range: if range > 0.0 { range } else { 1.0 },
        }
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.min) / self.range
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y * self.range + self.min
    }
}

/// Trained (or freshly initialized) forecaster weights plus the value scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub network: Network,
    pub scaler: MinMaxScaler,
}

impl ModelParams {
    pub fn look_ahead(&self) -> usize {
        self.network.output_size()
    }

    pub fn is_finite(&self) -> bool {
        self.network
            .buffers()
            .iter()
            .all(|b| b.iter().all(|x| x.is_finite()))
    }
}

/// Uniform `±1/√hidden` weights, zero biases, forget-gate bias 1.
pub fn init_params(config: &ForecasterConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut network = Network::zeros(&config.recurrent_layer_sizes, config.look_ahead);
    for layer in &mut network.layers {
        let bound = 1.0 / (layer.hidden_size as f64).sqrt();
        for gate in layer.gates_mut() {
            gate.weights
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-bound..bound));
        }
        layer.forget_gate.bias.iter_mut().for_each(|b| *b = 1.0);
    }
    let bound = 1.0 / (network.dense.cols as f64).sqrt();
    network
        .dense
        .weights
        .iter_mut()
        .for_each(|w| *w = rng.random_range(-bound..bound));
    Ok(ModelParams {
        network,
        scaler: MinMaxScaler::default(),
    })
}

/// Predicts `look_ahead` values from a `look_back` window, in original units.
pub fn forward(params: &ModelParams, window: &[f64], look_back: usize) -> Result<Vec<f64>> {
    if window.len() != look_back {
        return Err(Error::ShapeMismatch {
            expected: look_back,
            actual: window.len(),
        });
    }
    let scaled: Vec<f64> = window.iter().map(|&x| params.scaler.transform(x)).collect();
    let out = params.network.predict(&scaled);
    Ok(out.into_iter().map(|y| params.scaler.inverse(y)).collect())
}

/// Predictions at the configured horizon with their absolute errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub errors: ErrorSeries,
    /// Predicted value at each index of `errors`.
    pub predicted: Vec<f64>,
}

pub fn forecast(
    params: &ModelParams,
    series: &TimeSeries,
    config: &ForecasterConfig,
) -> Result<Forecast> {
    if params.look_ahead() != config.look_ahead {
        return Err(Error::ShapeMismatch {
            expected: config.look_ahead,
            actual: params.look_ahead(),
        });
    }
    let windows = make_windows(&series.values, config.look_back, config.look_ahead)?;
    let predictions = windows
        .inputs
        .par_iter()
        .map(|w| forward(params, w, config.look_back))
        .collect::<Result<Vec<_>>>()?;
    let errors = horizon_errors(&windows, &predictions, config.horizon_index)?;
    let predicted = predictions
        .iter()
        .map(|p| p[config.horizon_index])
        .collect();
    Ok(Forecast { errors, predicted })
}

/// Absolute errors over every window of `series` at the configured horizon.
pub fn predict_errors(
    params: &ModelParams,
    series: &TimeSeries,
    config: &ForecasterConfig,
) -> Result<ErrorSeries> {
    forecast(params, series, config).map(|f| f.errors)
}

/// Reads a headerless two-column `index,error` CSV.
pub fn load_external_errors(path: impl AsRef<Path>) -> Result<ErrorSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_external_errors(file)
}

pub fn read_external_errors<R: std::io::Read>(reader: R) -> Result<ErrorSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut indices = Vec::new();
    let mut errors = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row + 1;
        if record.len() != 2 {
            return Err(Error::Parse {
                row,
                message: format!("expected 2 columns, got {}", record.len()),
            });
        }
        // tolerate a header line
        if row == 1 && record[0].parse::<usize>().is_err() && record[1].parse::<f64>().is_err() {
            continue;
        }
        let index: usize = record[0].parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad index `{}`", &record[0]),
        })?;
        let error: f64 = record[1].parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad error value `{}`", &record[1]),
        })?;
        if !(error.is_finite() && error >= 0.0) {
            return Err(Error::Parse {
                row,
                message: format!("error values must be finite and non-negative, got {error}"),
            });
        }
        indices.push(index);
        errors.push(error);
    }
    if errors.is_empty() {
        return Err(Error::Empty("error file has no rows".into()));
    }
    ErrorSeries::new(indices, errors)
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model: weights, scaler, configuration and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ForecasterConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: ForecasterConfig, params: ModelParams) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            params,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        Ok(ck)
    }
}
