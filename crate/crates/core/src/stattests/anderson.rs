//! Anderson-Darling goodness of fit for a generalized Pareto tail whose
//! shape and scale were estimated from the same excesses.
//!
//! P-values come from the estimated-parameter critical-value table when the
//! shape lies in `[-0.5, 0.5]` and from a parametric bootstrap otherwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PValueMethod, TestReport, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::evt::{fit_gpd, Gpd};

const MIN_N: usize = 10;

/// Upper-tail probabilities of the table columns.
const ALPHAS: [f64; 7] = [0.5, 0.25, 0.10, 0.05, 0.025, 0.01, 0.005];

/// Critical values of A² with both parameters estimated, one row per shape.
/// Rows are keyed by `k = -γ` in increasing order.
const TABLE_K: [f64; 9] = [-0.5, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
const TABLE: [[f64; 7]; 9] = [
    [0.356, 0.499, 0.685, 0.830, 0.978, 1.180, 1.336],
    [0.376, 0.534, 0.741, 0.903, 1.069, 1.296, 1.471],
    [0.386, 0.550, 0.766, 0.935, 1.110, 1.348, 1.532],
    [0.397, 0.569, 0.796, 0.974, 1.158, 1.409, 1.603],
    [0.410, 0.591, 0.831, 1.020, 1.215, 1.481, 1.687],
    [0.426, 0.617, 0.873, 1.074, 1.283, 1.567, 1.788],
    [0.445, 0.649, 0.924, 1.140, 1.365, 1.672, 1.909],
    [0.468, 0.688, 0.985, 1.221, 1.465, 1.799, 2.058],
    [0.496, 0.735, 1.061, 1.321, 1.590, 1.958, 2.243],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    /// Use the bootstrap even when the shape is inside the table range.
    pub force: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1999,
            seed: 0,
            force: false,
        }
    }
}

/// `A² = -n - (1/n)·Σ (2i-1)·[ln F(z_(i)) + ln(1 - F(z_(n+1-i)))]`.
pub fn ad_statistic(excesses: &[f64], dist: &Gpd) -> Result<f64> {
    let n = excesses.len();
    if n == 0 {
        return Err(Error::Empty("no excesses".into()));
    }
    let mut z = excesses.to_vec();
    z.sort_by(f64::total_cmp);
    // ln F and ln(1 - F) at every order statistic
    let mut ln_cdf = Vec::with_capacity(n);
    let mut ln_sf = Vec::with_capacity(n);
    for &y in &z {
        let s = dist.ln_sf(y);
        if !(y > 0.0) || !s.is_finite() {
            return Err(Error::OutsideSupport { value: y });
        }
        let c = (-s.exp_m1()).ln();
        if !c.is_finite() {
            return Err(Error::OutsideSupport { value: y });
        }
        ln_cdf.push(c);
        ln_sf.push(s);
    }
    let sum: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (ln_cdf[i] + ln_sf[n - 1 - i]))
        .sum();
    Ok(-(n as f64) - sum / n as f64)
}

fn table_covers(gamma: f64) -> bool {
    (-0.5..=0.5).contains(&gamma)
}

/// Critical values for shape `gamma`, linear between table rows.
fn critical_values(gamma: f64) -> [f64; 7] {
    let k = -gamma;
    let hi = TABLE_K
        .partition_point(|&r| r < k)
        .clamp(1, TABLE_K.len() - 1);
    let lo = hi - 1;
    let f = (k - TABLE_K[lo]) / (TABLE_K[hi] - TABLE_K[lo]);
    std::array::from_fn(|j| TABLE[lo][j] + f * (TABLE[hi][j] - TABLE[lo][j]))
}

/// `ln α` is linear in A² between critical values and extrapolated from the
/// outermost segments.
fn table_p_value(a2: f64, gamma: f64) -> f64 {
    let crit = critical_values(gamma);
    let ln_alpha = ALPHAS.map(f64::ln);
    let seg = crit.partition_point(|&c| c < a2).clamp(1, crit.len() - 1);
    let (x0, x1) = (crit[seg - 1], crit[seg]);
    let (y0, y1) = (ln_alpha[seg - 1], ln_alpha[seg]);
    let ln_p = y0 + (a2 - x0) * (y1 - y0) / (x1 - x0);
    ln_p.exp().min(1.0)
}

fn bootstrap_p_value(a2: f64, n: usize, dist: &Gpd, cfg: &BootstrapConfig) -> (f64, usize) {
    let stats: Vec<Option<f64>> = (0..cfg.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let y = dist.sample(&mut rng, n);
            let est = fit_gpd(&y).ok()?;
            ad_statistic(&y, &est.distribution()).ok()
        })
        .collect();
    let ok: Vec<f64> = stats.into_iter().flatten().collect();
    let failed = cfg.resamples - ok.len();
    let exceed = ok.iter().filter(|&&s| s >= a2).count();
    ((1 + exceed) as f64 / (ok.len() + 1) as f64, failed)
}

/// Null hypothesis: the excesses follow the fitted GPD.
pub fn anderson_darling_gpd(excesses: &[f64], dist: &Gpd) -> Result<TestReport> {
    anderson_darling_gpd_with(excesses, dist, &BootstrapConfig::default())
}

pub fn anderson_darling_gpd_with(
    excesses: &[f64],
    dist: &Gpd,
    cfg: &BootstrapConfig,
) -> Result<TestReport> {
    if excesses.len() < MIN_N {
        return Err(Error::InsufficientData {
            required: MIN_N,
            available: excesses.len(),
        });
    }
    let a2 = ad_statistic(excesses, dist)?;
    if table_covers(dist.gamma) && !cfg.force {
        let p = table_p_value(a2, dist.gamma);
        return Ok(TestReport::new(
            "anderson_darling_gpd",
            a2,
            p,
            DEFAULT_ALPHA,
            PValueMethod::CriticalValueTable,
        ));
    }
    if cfg.resamples == 0 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least one resample".into(),
        ));
    }
    let (p, failed) = bootstrap_p_value(a2, excesses.len(), dist, cfg);
    if failed > 0 {
        log::warn!("{failed} of {} bootstrap refits failed", cfg.resamples);
    }
    Ok(TestReport::new(
        "anderson_darling_gpd",
        a2,
        p,
        DEFAULT_ALPHA,
        PValueMethod::ParametricBootstrap {
            resamples: cfg.resamples,
            failed_fits: failed,
        },
    ))
}
