//! Goodness-of-fit checks for the distributional assumptions of the
//! detectors: Shapiro-Wilk normality and Anderson-Darling for a fitted GPD.

pub mod anderson;
pub mod shapiro;

use serde::{Deserialize, Serialize};

pub use anderson::{
    ad_statistic, anderson_darling_gpd, anderson_darling_gpd_with, BootstrapConfig,
};
pub use shapiro::{shapiro_wilk, shapiro_wilk_statistic};

pub const DEFAULT_ALPHA: f64 = 0.001;
/// Smallest reported p-value; anything below is flagged instead.
pub const P_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PValueMethod {
    /// Exact arcsine formula for three observations.
    ExactThreePoint,
    /// Normalizing transformation of `ln(1 - W)`.
    NormalApproximation,
    /// Interpolation in the estimated-parameter critical-value table.
    CriticalValueTable,
    /// Parametric bootstrap with refitting on every resample.
    ParametricBootstrap {
        resamples: usize,
        failed_fits: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject_null: bool,
    pub method: PValueMethod,
    /// The raw p-value was below [`P_FLOOR`] and has been clamped to it.
    pub p_below_floor: bool,
}

impl TestReport {
    pub(crate) fn new(
        name: &str,
        statistic: f64,
        p: f64,
        alpha: f64,
        method: PValueMethod,
    ) -> Self {
        let p = p.clamp(0.0, 1.0);
        let below = p < P_FLOOR;
        let p_value = p.max(P_FLOOR);
        Self {
            test_name: name.to_string(),
            statistic,
            p_value,
            alpha,
            reject_null: p_value < alpha,
            method,
            p_below_floor: below,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.reject_null = self.p_value < alpha;
        self
    }

    /// `"< 1e-300"` for clamped values, otherwise a short scientific form.
    pub fn p_value_display(&self) -> String {
        if self.p_below_floor {
            format!("< {P_FLOOR:e}")
        } else {
            format!("{:.3e}", self.p_value)
        }
    }
}
