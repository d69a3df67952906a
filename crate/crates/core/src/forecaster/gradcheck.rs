use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lstm::Network;
use super::ModelParams;
use crate::error::{Error, Result};

fn scaled(params: &ModelParams, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| params.scaler.transform(x)).collect()
}

fn loss(net: &Network, x: &[f64], y: &[f64]) -> f64 {
    let p = net.predict(x);
    p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// MSE of one window (scaled space) and its gradient with respect to every
/// network parameter.
pub fn loss_and_gradient(
    params: &ModelParams,
    window: &[f64],
    target: &[f64],
) -> Result<(f64, Network)> {
    let net = &params.network;
    if target.len() != net.output_size() {
        return Err(Error::ShapeMismatch {
            expected: net.output_size(),
            actual: target.len(),
        });
    }
    let x = scaled(params, window);
    let y = scaled(params, target);
    let trace = net.forward_trace::<ChaCha8Rng>(&x, None);
    let n = y.len() as f64;
    let d: Vec<f64> = trace
        .output
        .iter()
        .zip(&y)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    let l = trace
        .output
        .iter()
        .zip(&y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let mut grad = net.zeros_like();
    net.backward(&trace, &d, &mut grad);
    Ok((l, grad))
}

/// Largest relative deviation between backpropagated and central-difference
/// gradients over `samples` randomly chosen parameters:
/// `|a - n| / (|a| + |n| + 1e-12)`.
pub fn gradient_check(
    params: &ModelParams,
    window: &[f64],
    target: &[f64],
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let (_, grad) = loss_and_gradient(params, window, target)?;
    let x = scaled(params, window);
    let y = scaled(params, target);

    // (buffer, offset) for every flat parameter index
    let lens: Vec<usize> = params.network.buffers().iter().map(|b| b.len()).collect();
    let total: usize = lens.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, total, samples.min(total));

    let analytic: Vec<f64> = grad.buffers().into_iter().flatten().copied().collect();
    let mut probe = params.network.clone();
    let mut worst: f64 = 0.0;
    for flat in picks.iter() {
        let (mut b, mut k) = (0, flat);
        while k >= lens[b] {
            k -= lens[b];
            b += 1;
        }
        let orig = probe.buffers()[b][k];
        probe.buffers_mut()[b][k] = orig + epsilon;
        let up = loss(&probe, &x, &y);
        probe.buffers_mut()[b][k] = orig - epsilon;
        let down = loss(&probe, &x, &y);
        probe.buffers_mut()[b][k] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[flat];
        let dev = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
        worst = worst.max(dev);
    }
    Ok(worst)
}
