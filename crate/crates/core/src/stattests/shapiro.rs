//! Shapiro-Wilk test with Royston's approximations for the coefficients and
//! the null distribution of `W` (algorithm AS R94).

use statrs::distribution::{ContinuousCDF, Normal};

use super::{PValueMethod, TestReport, DEFAULT_ALPHA};
use crate::error::{Error, Result};

const MIN_N: usize = 3;
const MAX_N: usize = 5000;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Half of the antisymmetric coefficient vector, largest first.
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let std_normal = Normal::standard();
    let an = n as f64;
    let m: Vec<f64> = (1..=half)
        .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// `(W, 1 - W)`; the complement is computed directly to keep precision when
/// `W` is close to one.
pub fn shapiro_wilk_statistic(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "Shapiro-Wilk needs {MIN_N} to {MAX_N} observations, got {n}"
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "sample contains non-finite values".into(),
        ));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if !(range > 0.0) {
        return Err(Error::ZeroVariance("all observations are equal".into()));
    }
    let a = coefficients(n);
    // full coefficient vector: -a for the lower half, +a for the upper half
    let coef = |i: usize| -> f64 {
        let j = n - 1 - i;
        match i.cmp(&j) {
            std::cmp::Ordering::Less => -a[i],
            std::cmp::Ordering::Greater => a[j],
            std::cmp::Ordering::Equal => 0.0,
        }
    };
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_a = (0..n).map(coef).sum::<f64>() / n as f64;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, &xi) in xs.iter().enumerate() {
        let da = coef(i) - mean_a;
        let dx = xi - mean_x;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let root = (ssa * ssx).sqrt();
    let w1 = (root - sax) * (root + sax) / (ssa * ssx);
    Ok((1.0 - w1, w1))
}

/// Null hypothesis: the sample is drawn from a normal distribution.
pub fn shapiro_wilk(sample: &[f64]) -> Result<TestReport> {
    let n = sample.len();
    let (w, w1) = shapiro_wilk_statistic(sample)?;
    let report = |p: f64, method| TestReport::new("shapiro_wilk", w, p, DEFAULT_ALPHA, method);

    if n == 3 {
        let stqr = std::f64::consts::FRAC_PI_3;
        let p = (6.0 / std::f64::consts::PI * (w.sqrt().asin() - stqr)).max(0.0);
        return Ok(report(p, PValueMethod::ExactThreePoint));
    }

    let an = n as f64;
    let mut y = w1.ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return Ok(report(1e-99, PValueMethod::NormalApproximation));
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    let p = Normal::new(m, s)
        .map_err(|e| Error::Numerical(format!("normalizing transform: {e}")))?
        .sf(y);
    Ok(report(p, PValueMethod::NormalApproximation))
}
