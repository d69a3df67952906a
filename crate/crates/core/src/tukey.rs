//! Tukey's far-out fence on the concatenated error stream.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{quantile_sorted, sorted};
use crate::series::ErrorSeries;

pub const FAR_OUT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TukeyFit {
    pub q1: f64,
    pub q3: f64,
    pub tau_t: f64,
}

/// Fence `Q3 + multiplier·(Q3 - Q1)` from interpolated quartiles.
pub fn fit_tukey_values(errors: &[f64], multiplier: f64) -> Result<TukeyFit> {
    if errors.len() < 4 {
        return Err(Error::InsufficientData {
            required: 4,
            available: errors.len(),
        });
    }
    if !(multiplier >= 0.0 && multiplier.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fence multiplier {multiplier}"
        )));
    }
    let s = sorted(errors);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    Ok(TukeyFit {
        q1,
        q3,
        tau_t: q3 + multiplier * (q3 - q1),
    })
}

pub fn fit_tukey(errors: &ErrorSeries) -> Result<TukeyFit> {
    fit_tukey_values(&errors.errors, FAR_OUT)
}

/// Indices whose error lies strictly above the fence.
pub fn detect_tukey(fit: &TukeyFit, errors: &ErrorSeries) -> BTreeSet<usize> {
    errors
        .iter()
        .filter(|&(_, e)| e > fit.tau_t)
        .map(|(i, _)| i)
        .collect()
}
