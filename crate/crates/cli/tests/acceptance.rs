//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the summary is always printed; exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lstm_evt_core::evaluation::{compute_metrics, f1_score, match_detections, MatchSpec};
use lstm_evt_core::evt::{evt_threshold, fit_gpd, fit_pot_values, tail_probability, GpdFit};
use lstm_evt_core::forecaster::{gradient_check, init_params};
use lstm_evt_core::stattests::{anderson_darling_gpd, shapiro_wilk, shapiro_wilk_statistic};
use lstm_evt_core::tukey::fit_tukey_values;
use lstm_evt_core::ForecasterConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("took {t:.1?}, budget {budget:?}"))
}

/// GPD inverse CDF, written out independently of the library.
fn gpd_draw(u: f64, gamma: f64, sigma: f64) -> f64 {
    if gamma == 0.0 {
        -sigma * (1.0 - u).ln()
    } else {
        sigma / gamma * ((1.0 - u).powf(-gamma) - 1.0)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_threshold_closed_form() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_limit, mut worst_inverse) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(1_000..1_000_000usize);
        let n_t = rng.random_range(10..=n / 20);
        let t = rng.random_range(-5.0..50.0);
        let sigma = rng.random_range(0.05..20.0);
        let q = rng.random_range(1e-6..0.5) * n_t as f64 / n as f64;

        let g0 = rng.random_range(-9e-9..9e-9);
        let tau0 = evt_threshold(t, g0, sigma, q, n, n_t).map_err(|e| e.to_string())?;
        let oracle = t + sigma * (n_t as f64 / (q * n as f64)).ln();
        worst_limit = worst_limit.max(rel(tau0, oracle));

        let gamma = rng.random_range(-0.5..1.0);
        let tau_e = evt_threshold(t, gamma, sigma, q, n, n_t).map_err(|e| e.to_string())?;
        let fit = GpdFit {
            t,
            gamma_hat: gamma,
            sigma_hat: sigma,
            n,
            n_t,
            q,
            tau_e,
        };
        let p = tail_probability(&fit, tau_e);
        ensure(!p.below_threshold, || format!("tau_e {tau_e} below t {t}"))?;
        worst_inverse = worst_inverse.max(rel(p.probability, q));
    }
    ensure(worst_limit <= 1e-12, || {
        format!("exponential limit off by {worst_limit:e}")
    })?;
    ensure(worst_inverse <= 1e-12, || {
        format!("tail inversion off by {worst_inverse:e}")
    })?;
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!(
        "100 tuples; limit rel err {worst_limit:.1e}, inversion rel err {worst_inverse:.1e}"
    ))
}

fn c2_gpd_recovery() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (k, gamma) in [-0.2, 0.0, 0.3, 0.7].into_iter().enumerate() {
        let sigma = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let x: Vec<f64> = (0..100_000)
            .map(|_| gpd_draw(rng.random::<f64>(), gamma, sigma))
            .collect();
        let est = fit_gpd(&x).map_err(|e| e.to_string())?;
        let tol = if gamma == 0.0 { 0.05 } else { 0.03 };
        ensure((est.gamma - gamma).abs() <= tol, || {
            format!("gamma {gamma}: estimate {} outside ±{tol}", est.gamma)
        })?;
        ensure(rel(est.sigma, sigma) <= 0.05, || {
            format!(
                "gamma {gamma}: sigma estimate {} off by more than 5%",
                est.sigma
            )
        })?;
        notes.push(format!("{gamma}→({:.3},{:.3})", est.gamma, est.sigma));
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(notes.join(" "))
}

fn c3_gaussian_parent() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f64> = (0..1_000_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let fit = fit_pot_values(&x, 0.98, 1e-4).map_err(|e| e.to_string())?;
    let truth = 3.719;
    let r = rel(fit.tau_e, truth);
    ensure(r <= 0.10, || {
        format!("tau_e {} is {:.1}% from {truth}", fit.tau_e, 100.0 * r)
    })?;
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!(
        "tau_e {:.4} ({:.2}% from {truth})",
        fit.tau_e,
        100.0 * r
    ))
}

fn c4_shapiro_wilk() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e: Vec<f64> = (0..5000).map(|_| Exp1.sample(&mut rng)).collect();
    let p_exp = shapiro_wilk(&e).map_err(|e| e.to_string())?.p_value;
    ensure(p_exp < 1e-10, || format!("exponential p {p_exp:e}"))?;

    let mut kept = 0;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let z: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = shapiro_wilk(&z)
            .map_err(|e| e.to_string())?
            .with_alpha(0.001);
        kept += usize::from(!r.reject_null);
    }
    ensure(kept >= 198, || {
        format!("normal samples retained {kept}/200")
    })?;

    // Weights of eleven men from the original publication, W = 0.79 there
    // and 0.78884 with exact coefficients.
    let heights = [
        148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0,
    ];
    let (w, _) = shapiro_wilk_statistic(&heights).map_err(|e| e.to_string())?;
    ensure((w - 0.78884).abs() < 5e-4, || format!("reference W {w}"))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "exp p {p_exp:.1e}, normal retained {kept}/200, reference W {w:.4}"
    ))
}

fn c5_anderson_darling() -> Outcome {
    let start = Instant::now();
    let (gamma, sigma) = (0.2, 1.0);
    let mut rejected = 0;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let x: Vec<f64> = (0..1000)
            .map(|_| gpd_draw(rng.random::<f64>(), gamma, sigma))
            .collect();
        let est = fit_gpd(&x).map_err(|e| e.to_string())?;
        let r = anderson_darling_gpd(&x, &est.distribution())
            .map_err(|e| e.to_string())?
            .with_alpha(0.05);
        rejected += usize::from(r.reject_null);
    }
    let rate = rejected as f64 / 200.0;
    ensure((0.02..=0.09).contains(&rate), || {
        format!("rejection rate {rate}")
    })?;
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!("rejection rate {rate:.3} at alpha 0.05"))
}

fn c6_tukey() -> Outcome {
    let f = fit_tukey_values(&[0.0, 1.0, 2.0, 3.0, 4.0], 3.0).map_err(|e| e.to_string())?;
    ensure(f.tau_t == 9.0, || format!("fence on 0..4 is {}", f.tau_t))?;
    let ramp: Vec<f64> = (0..100).map(f64::from).collect();
    let f = fit_tukey_values(&ramp, 3.0).map_err(|e| e.to_string())?;
    ensure((f.tau_t - 222.75).abs() < 1e-12, || {
        format!("fence on 0..99 is {}", f.tau_t)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(4..300);
        let x: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-50.0..50.0));
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let fx = fit_tukey_values(&x, 3.0).map_err(|e| e.to_string())?;
        let fy = fit_tukey_values(&y, 3.0).map_err(|e| e.to_string())?;
        let expect = a * fx.tau_t + b;
        worst = worst.max((fy.tau_t - expect).abs() / (1.0 + expect.abs()));
    }
    ensure(worst < 1e-9, || {
        format!("affine equivariance off by {worst:e}")
    })?;
    Ok(format!(
        "fixtures exact; affine deviation {worst:.1e} over 100 streams"
    ))
}

fn c7_gradient_check() -> Outcome {
    let start = Instant::now();
    let mut devs = Vec::new();
    for (layers, seed) in [(vec![6], 1u64), (vec![5, 4], 2)] {
        let params = init_params(&ForecasterConfig {
            recurrent_layer_sizes: layers,
            look_back: 5,
            look_ahead: 3,
            seed,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let dev = gradient_check(
            &params,
            &[0.3, -0.8, 0.5, 1.1, -0.2],
            &[0.4, 0.9, -0.6],
            1e-5,
            20,
            seed,
        )
        .map_err(|e| e.to_string())?;
        ensure(dev < 1e-4, || format!("deviation {dev:e}"))?;
        devs.push(dev);
    }
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!(
        "1-layer {:.1e}, 2-layer {:.1e} (20-parameter subsample)",
        devs[0], devs[1]
    ))
}

fn c8_metrics() -> Outcome {
    let f1 = f1_score(0.75, 0.85);
    // 2·0.75·0.85/1.6 = 0.796875, reported as 0.79 (two decimals, truncated)
    ensure((f1 - 0.796875).abs() < 1e-12, || format!("F1 {f1}"))?;
    ensure((f1 * 100.0).floor() / 100.0 == 0.79, || {
        format!("F1 {f1} truncates wrongly")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..2000 {
        let len = rng.random_range(1..400usize);
        let density = rng.random_range(0.0..0.3);
        let mut draw =
            |p: f64| -> BTreeSet<usize> { (0..len).filter(|_| rng.random_bool(p)).collect() };
        let labels = draw(density);
        let flags = draw(density);
        let tolerance = rng.random_range(0..5);
        let points = MatchSpec {
            tolerance,
            group_runs: false,
        };
        let c = match_detections(&flags, &labels, &points);
        ensure(c.true_positives + c.false_negatives == labels.len(), || {
            format!("case {case}: TP+FN != |labels|")
        })?;
        ensure(c.true_positives + c.false_positives <= flags.len(), || {
            format!("case {case}: a flag matched twice")
        })?;
        let m = compute_metrics(c);
        let bound = 2.0 * m.precision.min(m.recall);
        ensure(m.f1 <= bound + 1e-12, || {
            format!("case {case}: F1 above 2·min(P,R)")
        })?;
        let wider = MatchSpec {
            tolerance: tolerance + 2,
            group_runs: false,
        };
        ensure(
            match_detections(&flags, &labels, &wider).true_positives >= c.true_positives,
            || format!("case {case}: wider tolerance lost a hit"),
        )?;
    }
    Ok(format!(
        "F1(0.75, 0.85) = {f1:.6} ≈ 0.79; identities hold on 2000 cases"
    ))
}

const NAB_SERIES: [(&str, &str, &[usize], f64, f64); 3] = [
    ("speed", "speed_7578.csv", &[60], 0.19, 1e-4),
    ("travel time", "TravelTime_387.csv", &[20], 0.2, 0.01),
    ("occupancy", "occupancy_6005.csv", &[50], 0.23, 1e-4),
];

fn nab_root() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("NAB_DATA_DIR").map(PathBuf::from),
        Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/NAB")),
    ];
    candidates
        .into_iter()
        .flatten()
        .find(|p| p.join("labels/combined_windows.json").is_file())
}

fn c9_nab_reproduction() -> Outcome {
    let start = Instant::now();
    let root = nab_root().ok_or_else(|| {
        "NAB data not found: set NAB_DATA_DIR to a checkout containing \
         data/realTraffic and labels/combined_windows.json"
            .to_string()
    })?;
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut evt_wins = 0;
    let mut notes = Vec::new();
    for (name, file, layers, dropout, lr) in NAB_SERIES {
        let data = root.join("data/realTraffic").join(file);
        let out = work.path().join(file.trim_end_matches(".csv"));
        let layers = layers
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let o = common::bin()
            .arg("pipeline")
            .arg("--data")
            .arg(&data)
            .arg("--labels")
            .arg(root.join("labels/combined_windows.json"))
            .arg("--output-dir")
            .arg(&out)
            .args(["--layers", &layers, "--dropout", &dropout.to_string()])
            .args(["--learning-rate", &lr.to_string()])
            .args(["--look-back", "1", "--look-ahead", "1"])
            .args(["--max-epochs", "100", "--batch-size", "64", "--seed", "1"])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), || {
            format!(
                "{name}: pipeline failed: {}",
                String::from_utf8_lossy(&o.stderr)
            )
        })?;
        let read = |f: &str| -> Result<Value, String> {
            let bytes = std::fs::read(out.join(f)).map_err(|e| e.to_string())?;
            serde_json::from_slice(&bytes).map_err(|e| e.to_string())
        };
        let tests = read("tests.json")?;
        let sw = tests
            .as_array()
            .and_then(|a| a.iter().find(|t| t["test_name"] == "shapiro_wilk"))
            .ok_or("no Shapiro-Wilk report")?;
        let p = sw["p_value"].as_f64().unwrap_or(f64::NAN);
        ensure(p < 0.001, || {
            format!("{name}: Shapiro-Wilk p {p} does not reject")
        })?;
        let metrics = read("metrics.json")?;
        let f1 = |rule: &str| {
            metrics["detectors"]
                .as_array()
                .and_then(|d| d.iter().find(|r| r["detector_name"] == rule))
                .and_then(|r| r["f1"].as_f64())
                .unwrap_or(f64::NAN)
        };
        let (g, e) = (f1("gaussian"), f1("evt"));
        evt_wins += usize::from(e >= g);
        notes.push(format!(
            "{name}: SW p {p:.1e}, F1 gaussian {g:.2} evt {e:.2}"
        ));
    }
    ensure(evt_wins >= 2, || {
        format!(
            "EVT F1 >= Gaussian F1 on {evt_wins}/3 series; {}",
            notes.join("; ")
        )
    })?;
    within_budget(start, Duration::from_secs(15 * 60))?;
    Ok(notes.join("; "))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("synthetic.csv");
    common::write_dataset(&data, 5);
    let out = dir.path().join("out");
    let first = dir.path().join("first");
    common::pipeline(&data, &out);
    std::fs::rename(&out, &first).map_err(|e| e.to_string())?;
    common::pipeline(&data, &out);
    let files = common::listing(&out);
    let json = files.iter().filter(|f| f.ends_with(".json")).count();
    let diff = common::differing(&first, &out, &[]);
    ensure(diff.is_empty(), || format!("differing artifacts: {diff:?}"))?;
    Ok(format!(
        "{} artifacts ({json} JSON) byte-identical",
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "threshold closed form and inversion",
            c1_threshold_closed_form,
        ),
        ("GPD maximum-likelihood recovery", c2_gpd_recovery),
        ("EVT threshold on a Gaussian parent", c3_gaussian_parent),
        ("Shapiro-Wilk power, size and reference W", c4_shapiro_wilk),
        (
            "Anderson-Darling size on true GPD data",
            c5_anderson_darling,
        ),
        ("Tukey fence formula and affine equivariance", c6_tukey),
        ("forecaster gradient check", c7_gradient_check),
        ("metrics F1 and confusion identities", c8_metrics),
        (
            "qualitative reproduction on NAB traffic series",
            c9_nab_reproduction,
        ),
        ("pipeline determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name} [{secs:.1}s] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name} [{secs:.1}s] {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
