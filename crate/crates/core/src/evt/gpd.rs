//! Generalized Pareto distribution and its maximum likelihood fit.
//!
//! The fit follows Grimshaw's reduction. With `θ = γ/σ`, the likelihood
//! equations collapse to the single equation `w(θ) = u(θ)·v(θ) - 1 = 0` where
//!
//! ```text
//! u(θ) = (1/n) Σ 1/(1 + θ·y_i)      v(θ) = 1 + (1/n) Σ ln(1 + θ·y_i)
//! ```
//!
//! and a root gives `γ = v(θ) - 1`, `σ = γ/θ`. Non-zero roots lie in
//! `(-1/y_max, 0)` or `(0, 2(ȳ - y_min)/y_min²]`. Every bracketed root and the
//! exponential limit `γ = 0, σ = ȳ` are scored by log-likelihood; the best wins.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the shape is treated as exactly zero.
pub const GAMMA_EPS: f64 = 1e-8;

const MIN_EXCESSES: usize = 10;
const GRID_POINTS: usize = 200;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gpd {
    pub gamma: f64,
    pub sigma: f64,
}

impl Gpd {
    pub fn new(gamma: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid GPD parameters gamma={gamma}, sigma={sigma}"
            )));
        }
        Ok(Self { gamma, sigma })
    }

    fn is_exponential(&self) -> bool {
        self.gamma.abs() < GAMMA_EPS
    }

    /// Upper end of the support (`σ/|γ|` for negative shape).
    pub fn upper_bound(&self) -> f64 {
        if self.gamma < 0.0 && !self.is_exponential() {
            self.sigma / -self.gamma
        } else {
            f64::INFINITY
        }
    }

    /// `ln P(Y > y)`; `-∞` beyond the support.
    pub fn ln_sf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if self.is_exponential() {
            return -y / self.sigma;
        }
        let z = self.gamma * y / self.sigma;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -z.ln_1p() / self.gamma
    }

    pub fn sf(&self, y: f64) -> f64 {
        self.ln_sf(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        -self.ln_sf(y).exp_m1()
    }

    /// Inverse CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let ln_tail = (-p).ln_1p();
        if self.is_exponential() {
            -self.sigma * ln_tail
        } else {
            self.sigma / self.gamma * (-self.gamma * ln_tail).exp_m1()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }

    /// `-n·ln σ - (1 + 1/γ)·Σ ln(1 + γ·y/σ)`, or `-n·ln σ - Σy/σ` at γ = 0.
    pub fn log_likelihood(&self, excesses: &[f64]) -> f64 {
        let n = excesses.len() as f64;
        if self.is_exponential() {
            return -n * self.sigma.ln() - excesses.iter().sum::<f64>() / self.sigma;
        }
        let r = self.gamma / self.sigma;
        let mut acc = 0.0;
        for &y in excesses {
            let z = r * y;
            if z <= -1.0 {
                return f64::NEG_INFINITY;
            }
            acc += z.ln_1p();
        }
        -n * self.sigma.ln() - (1.0 + 1.0 / self.gamma) * acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpdFitMethod {
    /// A root of Grimshaw's equation.
    Root,
    /// The `γ → 0` exponential limit.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdEstimate {
    pub gamma: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
    pub method: GpdFitMethod,
    pub roots_found: usize,
}

impl GpdEstimate {
    pub fn distribution(&self) -> Gpd {
        Gpd {
            gamma: self.gamma,
            sigma: self.sigma,
        }
    }
}

struct Grimshaw<'a> {
    y: &'a [f64],
}

impl Grimshaw<'_> {
    /// `(w(θ), mean ln(1 + θy))`.
    fn eval(&self, theta: f64) -> (f64, f64) {
        let n = self.y.len() as f64;
        let (mut su, mut sv) = (0.0, 0.0);
        for &y in self.y {
            let s = 1.0 + theta * y;
            su += 1.0 / s;
            sv += (theta * y).ln_1p();
        }
        let u = su / n;
        let mean_log = sv / n;
        (u * (1.0 + mean_log) - 1.0, mean_log)
    }

    fn candidate(&self, theta: f64) -> Option<GpdEstimate> {
        let (_, gamma) = self.eval(theta);
        let sigma = gamma / theta;
        if !(sigma > 0.0 && sigma.is_finite() && gamma.is_finite()) {
            return None;
        }
        let ll = Gpd { gamma, sigma }.log_likelihood(self.y);
        ll.is_finite().then_some(GpdEstimate {
            gamma,
            sigma,
            log_likelihood: ll,
            method: GpdFitMethod::Root,
            roots_found: 0,
        })
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, mut w_lo: f64) -> f64 {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (w_mid, _) = self.eval(mid);
            if w_mid == 0.0 {
                return mid;
            }
            if (w_mid < 0.0) == (w_lo < 0.0) {
                lo = mid;
                w_lo = w_mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Roots of `w` bracketed by sign changes on an increasing grid.
    fn roots_on(&self, grid: &[f64]) -> Vec<f64> {
        let mut roots = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for &theta in grid {
            let (w, _) = self.eval(theta);
            if !w.is_finite() {
                prev = None;
                continue;
            }
            if let Some((t0, w0)) = prev {
                if w == 0.0 {
                    roots.push(theta);
                } else if w0 != 0.0 && (w0 < 0.0) != (w < 0.0) {
                    roots.push(self.bisect(t0, theta, w0));
                }
            }
            prev = Some((theta, w));
        }
        roots
    }
}

fn geomspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

/// Maximum likelihood GPD fit to strictly positive excesses.
pub fn fit_gpd(excesses: &[f64]) -> Result<GpdEstimate> {
    if excesses.len() < MIN_EXCESSES {
        return Err(Error::InsufficientData {
            required: MIN_EXCESSES,
            available: excesses.len(),
        });
    }
    if let Some(&bad) = excesses.iter().find(|y| !(**y > 0.0 && y.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "excesses must be finite and positive, got {bad}"
        )));
    }
    let n = excesses.len() as f64;
    let (y_min, y_max) = excesses
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    let y_mean = excesses.iter().sum::<f64>() / n;
    if y_max - y_min <= f64::EPSILON * y_max {
        return Err(Error::ZeroVariance("all excesses are equal".into()));
    }

    let g = Grimshaw { y: excesses };

    // Left interval (-1/y_max, 0): dense near both ends.
    let left_edge = 1.0 / y_max;
    let mut left: Vec<f64> = geomspace(1e-7, 0.5, GRID_POINTS)
        .chain(geomspace(1e-10, 0.5, GRID_POINTS).map(|r| 1.0 - r))
        .map(|r| -r * left_edge)
        .collect();
    left.sort_by(f64::total_cmp);
    left.dedup();

    // Right interval (0, 2(ȳ - y_min)/y_min²].
    let right_edge = 2.0 * (y_mean - y_min) / (y_min * y_min);
    let right_lo = 1e-7 / y_mean;
    let right: Vec<f64> = if right_edge > right_lo {
        geomspace(right_lo, right_edge, 2 * GRID_POINTS).collect()
    } else {
        Vec::new()
    };

    let roots: Vec<f64> = g
        .roots_on(&left)
        .into_iter()
        .chain(g.roots_on(&right))
        .collect();
    let exp_sigma = y_mean;
    let mut best = GpdEstimate {
        gamma: 0.0,
        sigma: exp_sigma,
        log_likelihood: Gpd {
            gamma: 0.0,
            sigma: exp_sigma,
        }
        .log_likelihood(excesses),
        method: GpdFitMethod::Exponential,
        roots_found: roots.len(),
    };
    for &theta in &roots {
        if let Some(c) = g.candidate(theta) {
            if c.log_likelihood > best.log_likelihood && c.gamma.abs() >= GAMMA_EPS {
                best = GpdEstimate {
                    roots_found: roots.len(),
                    ..c
                };
            }
        }
    }
    if !best.log_likelihood.is_finite() {
        return Err(Error::Numerical(
            "GPD likelihood is not finite at any candidate".into(),
        ));
    }
    Ok(best)
}
