//! Peaks-over-threshold detection.
//!
//! Errors above an initial high quantile `t` are modelled as a generalized
//! Pareto tail. For a risk level `q` the threshold
//!
//! ```text
//! τ_e = t + (σ/γ)·((q·n/N_t)^(-γ) - 1)
//! ```
//!
//! satisfies `P(X > τ_e) = q` under the fitted tail, whatever the parent
//! distribution of the errors.

pub mod gpd;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use gpd::{fit_gpd, Gpd, GpdEstimate, GpdFitMethod, GAMMA_EPS};

use crate::error::{Error, Result};
use crate::quantile::{quantile_sorted, sorted};
use crate::series::ErrorSeries;

pub const DEFAULT_LEVEL: f64 = 0.98;
pub const DEFAULT_Q_GRID: [f64; 3] = [1e-3, 1e-4, 1e-5];
const MIN_OBSERVATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub t: f64,
    pub gamma_hat: f64,
    pub sigma_hat: f64,
    pub n: usize,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    pub q: f64,
    pub tau_e: f64,
}

impl GpdFit {
    pub fn tail(&self) -> Gpd {
        Gpd {
            gamma: self.gamma_hat,
            sigma: self.sigma_hat,
        }
    }

    /// Same tail, threshold recomputed for another risk level.
    pub fn with_q(&self, q: f64) -> Result<GpdFit> {
        let tau_e = evt_threshold(self.t, self.gamma_hat, self.sigma_hat, q, self.n, self.n_t)?;
        Ok(GpdFit { q, tau_e, ..*self })
    }

    fn validate(&self) -> Result<()> {
        let ok = self.sigma_hat > 0.0
            && self.sigma_hat.is_finite()
            && self.gamma_hat.is_finite()
            && self.t.is_finite()
            && self.tau_e.is_finite()
            && q_in_range(self.q)
            && self.n_t >= 1
            && self.n_t <= self.n;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "incomplete or invalid tail fit: {self:?}"
            )))
        }
    }
}

fn q_in_range(q: f64) -> bool {
    q > 0.0 && q < 1.0
}

pub fn initial_threshold_values(errors: &[f64], level: f64) -> Result<f64> {
    if errors.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            required: MIN_OBSERVATIONS,
            available: errors.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {level} outside (0, 1)"
        )));
    }
    Ok(quantile_sorted(&sorted(errors), level))
}

/// Empirical `level` quantile of the errors, the start of the modelled tail.
pub fn initial_threshold(errors: &ErrorSeries, level: f64) -> Result<f64> {
    initial_threshold_values(&errors.errors, level)
}

/// Threshold at risk `q`; the exponential limit `t + σ·ln(N_t/(q·n))` when
/// `|γ| < 1e-8`.
pub fn evt_threshold(t: f64, gamma: f64, sigma: f64, q: f64, n: usize, n_t: usize) -> Result<f64> {
    if !q_in_range(q) {
        return Err(Error::InvalidArgument(format!(
            "risk level {q} outside (0, 1)"
        )));
    }
    if n_t == 0 || n_t > n {
        return Err(Error::InvalidArgument(format!(
            "peak count {n_t} must lie in [1, {n}]"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale {sigma} must be positive"
        )));
    }
    let ln_ratio = (q * n as f64 / n_t as f64).ln();
    if gamma.abs() < GAMMA_EPS {
        Ok(t - sigma * ln_ratio)
    } else {
        Ok(t + sigma / gamma * (-gamma * ln_ratio).exp_m1())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProbability {
    pub probability: f64,
    /// `x < t`: the tail model does not apply and `N_t/n` is an upper bound.
    pub below_threshold: bool,
}

/// `(N_t/n)·(1 + γ(x-t)/σ)^(-1/γ)`, zero beyond the support.
pub fn tail_probability(fit: &GpdFit, x: f64) -> TailProbability {
    let rate = fit.n_t as f64 / fit.n as f64;
    if x < fit.t {
        return TailProbability {
            probability: rate,
            below_threshold: true,
        };
    }
    TailProbability {
        probability: rate * fit.tail().sf(x - fit.t),
        below_threshold: false,
    }
}

/// Fits the tail above the `level` quantile and sets the threshold for `q`.
pub fn fit_pot_values(errors: &[f64], level: f64, q: f64) -> Result<GpdFit> {
    let t = initial_threshold_values(errors, level)?;
    let excesses: Vec<f64> = errors.iter().filter(|&&e| e > t).map(|&e| e - t).collect();
    let est = fit_gpd(&excesses)?;
    log::debug!(
        "tail fit: t={t}, gamma={}, sigma={}, peaks={}, method={:?}",
        est.gamma,
        est.sigma,
        excesses.len(),
        est.method
    );
    let n = errors.len();
    let n_t = excesses.len();
    let tau_e = evt_threshold(t, est.gamma, est.sigma, q, n, n_t)?;
    Ok(GpdFit {
        t,
        gamma_hat: est.gamma,
        sigma_hat: est.sigma,
        n,
        n_t,
        q,
        tau_e,
    })
}

pub fn fit_pot(errors: &ErrorSeries, level: f64, q: f64) -> Result<GpdFit> {
    fit_pot_values(&errors.errors, level, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QCandidate {
    pub q: f64,
    pub tau_e: f64,
    pub detected_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QCalibration {
    pub q: f64,
    pub fit: GpdFit,
    /// False when no grid value exposes every labeled anomaly; `q` is then
    /// the largest grid value.
    pub all_detected: bool,
    pub events: usize,
    pub candidates: Vec<QCandidate>,
}

/// Picks the smallest `q` whose threshold lies below the peak error of every
/// labeled anomaly in the initialization stream.
///
/// Runs of consecutive labels count as one anomaly. Labels without an error
/// value (e.g. inside the first look-back window) are ignored.
pub fn calibrate_q(
    init_errors: &ErrorSeries,
    init_labels: &BTreeSet<usize>,
    q_grid: &[f64],
    level: f64,
) -> Result<QCalibration> {
    if q_grid.is_empty() {
        return Err(Error::InvalidArgument("empty q grid".into()));
    }
    if let Some(q) = q_grid.iter().find(|q| !q_in_range(**q)) {
        return Err(Error::InvalidArgument(format!(
            "risk level {q} outside (0, 1)"
        )));
    }
    let peaks = event_peaks(init_errors, init_labels);
    if peaks.is_empty() {
        return Err(Error::NoAnomalies(
            "initialization stream has no labeled anomaly".into(),
        ));
    }
    let mut grid = q_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let base = fit_pot(init_errors, level, grid[0])?;
    let mut candidates = Vec::with_capacity(grid.len());
    let mut chosen = None;
    for &q in &grid {
        let fit = base.with_q(q)?;
        let detected = peaks.iter().filter(|&&p| p > fit.tau_e).count();
        candidates.push(QCandidate {
            q,
            tau_e: fit.tau_e,
            detected_events: detected,
        });
        if chosen.is_none() && detected == peaks.len() {
            chosen = Some(fit);
        }
    }
    let all_detected = chosen.is_some();
    let fit = match chosen {
        Some(f) => f,
        None => {
            let q = *grid.last().expect("non-empty grid");
            log::warn!(
                "no q in the grid exposes all {} labeled anomalies; using q = {q}",
                peaks.len()
            );
            base.with_q(q)?
        }
    };
    Ok(QCalibration {
        q: fit.q,
        fit,
        all_detected,
        events: peaks.len(),
        candidates,
    })
}

/// Largest error inside each run of consecutive labels.
fn event_peaks(errors: &ErrorSeries, labels: &BTreeSet<usize>) -> Vec<f64> {
    let mut peaks: Vec<f64> = Vec::new();
    let mut last: Option<usize> = None;
    for (i, e) in errors.iter().filter(|(i, _)| labels.contains(i)) {
        let continues = last.is_some_and(|l| (l + 1..i).all(|j| labels.contains(&j)));
        match peaks.last_mut() {
            Some(p) if continues => *p = p.max(e),
            _ => peaks.push(e),
        }
        last = Some(i);
    }
    peaks
}

/// Indices whose error exceeds `τ_e`, equivalently whose tail probability is
/// below `q`.
pub fn detect_evt(fit: &GpdFit, errors: &ErrorSeries) -> Result<BTreeSet<usize>> {
    fit.validate()?;
    Ok(errors
        .iter()
        .filter(|&(_, e)| e > fit.tau_e)
        .map(|(i, _)| i)
        .collect())
}
