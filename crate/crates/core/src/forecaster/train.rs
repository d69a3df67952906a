use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::Network;
use super::{init_params, ForecasterConfig, MinMaxScaler, ModelParams};
use crate::error::{Error, Result};
use crate::series::WindowSet;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_mse_per_epoch: Vec<f64>,
    pub validation_mse_per_epoch: Vec<f64>,
    pub stopped_early: bool,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn best_validation_mse(&self) -> f64 {
        self.validation_mse_per_epoch[self.best_epoch - 1]
    }
}

struct Adam {
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(lr: f64, net: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = net.buffers().iter().map(|b| vec![0.0; b.len()]).collect();
        Self {
            lr,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn update(&mut self, net: &mut Network, grad: &Network) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (((p, g), m), v) in net
            .buffers_mut()
            .into_iter()
            .zip(grad.buffers())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for k in 0..p.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

fn scale_windows(set: &WindowSet, scaler: &MinMaxScaler) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let f = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().map(|&x| scaler.transform(x)).collect())
            .collect()
    };
    (f(&set.inputs), f(&set.targets))
}

fn mse(net: &Network, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, y) in inputs.iter().zip(targets) {
        let p = net.predict(x);
        total += p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += y.len();
    }
    total / count.max(1) as f64
}

/// Trains with Adam on mini-batch MSE, keeping the parameters of the best
/// validation epoch.
///
/// Values are min-max scaled with statistics from `train_windows`; reported
/// MSEs are in the scaled space. Training stops after
/// `early_stopping_patience` epochs without a strict improvement in
/// validation MSE, or at `max_epochs`.
pub fn train(
    config: &ForecasterConfig,
    train_windows: &WindowSet,
    val_windows: &WindowSet,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if train_windows.is_empty() || val_windows.is_empty() {
        return Err(Error::Empty(
            "training and validation windows must be non-empty".into(),
        ));
    }
    for set in [train_windows, val_windows] {
        let bad_in = set.inputs.iter().find(|w| w.len() != config.look_back);
        let bad_out = set.targets.iter().find(|w| w.len() != config.look_ahead);
        if let Some(w) = bad_in {
            return Err(Error::ShapeMismatch {
                expected: config.look_back,
                actual: w.len(),
            });
        }
        if let Some(w) = bad_out {
            return Err(Error::ShapeMismatch {
                expected: config.look_ahead,
                actual: w.len(),
            });
        }
    }

    let scaler = MinMaxScaler::fit(
        train_windows
            .inputs
            .iter()
            .chain(&train_windows.targets)
            .flatten(),
    );
    let (train_x, train_y) = scale_windows(train_windows, &scaler);
    let (val_x, val_y) = scale_windows(val_windows, &scaler);

    let mut net = init_params(config)?.network;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(config.learning_rate, &net);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let dropout = config.dropout_rate;

    let mut report = TrainReport {
        epochs_run: 0,
        train_mse_per_epoch: Vec::new(),
        validation_mse_per_epoch: Vec::new(),
        stopped_early: false,
        best_epoch: 0,
    };
    let mut best = (f64::INFINITY, net.clone());
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = net.zeros_like();
            let norm = (batch.len() * config.look_ahead) as f64;
            for &k in batch {
                let trace = if dropout > 0.0 {
                    net.forward_trace(&train_x[k], Some((dropout, &mut rng)))
                } else {
                    net.forward_trace::<ChaCha8Rng>(&train_x[k], None)
                };
                let d: Vec<f64> = trace
                    .output
                    .iter()
                    .zip(&train_y[k])
                    .map(|(p, t)| {
                        epoch_loss += (p - t) * (p - t);
                        2.0 * (p - t) / norm
                    })
                    .collect();
                net.backward(&trace, &d, &mut grad);
            }
            adam.update(&mut net, &grad);
        }
        let train_mse = epoch_loss / (train_x.len() * config.look_ahead) as f64;
        let val_mse = mse(&net, &val_x, &val_y);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Numerical(format!(
                "training diverged at epoch {epoch}: train mse {train_mse}, validation mse {val_mse}"
            )));
        }
        report.epochs_run = epoch;
        report.train_mse_per_epoch.push(train_mse);
        report.validation_mse_per_epoch.push(val_mse);
        log::debug!("epoch {epoch}: train mse {train_mse:.6e}, validation mse {val_mse:.6e}");

        if val_mse < best.0 {
            best = (val_mse, net.clone());
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stopping_patience {
                report.stopped_early = true;
                break;
            }
        }
    }

    Ok((
        ModelParams {
            network: best.1,
            scaler,
        },
        report,
    ))
}
