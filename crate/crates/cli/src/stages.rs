//! Pipeline stages. Each one reads its inputs from an artifact directory and
//! writes its outputs back to it, so any stage can be rerun or replaced.

use std::collections::BTreeSet;
use std::path::Path;

use log::{info, warn};
use lstm_evt_core::evaluation::{compute_metrics, match_detections};
use lstm_evt_core::evt::{calibrate_q, detect_evt, fit_pot, tail_probability};
use lstm_evt_core::forecaster::{forecast, train, Checkpoint, TrainReport};
use lstm_evt_core::gaussian::{detect_gaussian, fit_gaussian, search_tau_g};
use lstm_evt_core::series::{load_csv, make_windows_strided, split};
use lstm_evt_core::stattests::{anderson_darling_gpd_with, shapiro_wilk, BootstrapConfig};
use lstm_evt_core::tukey::{detect_tukey, fit_tukey_values};
use lstm_evt_core::{
    ErrorSeries, GaussianFit, GpdFit, MetricsReport, QCalibration, TestReport, TimeSeries, TukeyFit,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    self as art, DetectionRow, LabelCounts, PredictionRow, Rule, SplitManifest,
};
use crate::config::{ErrorStream, PipelineConfig};
use crate::error::{AtStage, CliError, Stage};
use crate::labels::{apply_labels, load_labels};

/// Largest sample handed to the normality test.
pub const SW_MAX_N: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Sw,
    Ad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTestReport {
    pub series: String,
    #[serde(flatten)]
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub series: String,
    pub detectors: Vec<MetricsReport>,
    pub tau_g: Option<f64>,
    pub q: Option<f64>,
}

/// Loads the dataset and applies the label file, if any.
pub fn load_dataset(cfg: &PipelineConfig) -> Result<(TimeSeries, usize), CliError> {
    let d = &cfg.dataset;
    let loaded = load_csv(&d.path, &d.schema).at(Stage::Load)?;
    let mut series = loaded.series;
    if let Some(labels) = &d.labels {
        let spec = load_labels(labels, d.labels_key.as_deref(), &d.path)?;
        series = apply_labels(series, &spec)?;
    }
    Ok((series, loaded.rejected_rows))
}

/// Fails with a data error if an input file named in the config is missing.
pub fn check_inputs(cfg: &PipelineConfig) -> Result<(), CliError> {
    let inputs = [
        Some(&cfg.dataset.path),
        cfg.dataset.labels.as_ref(),
        cfg.external_errors.as_ref(),
    ];
    for p in inputs.into_iter().flatten() {
        if !p.is_file() {
            return Err(CliError::Data {
                stage: Stage::Load,
                message: format!("input file {} does not exist", p.display()),
            });
        }
    }
    Ok(())
}

fn read_config(dir: &Path) -> Result<PipelineConfig, CliError> {
    art::read_json(&dir.join(art::CONFIG))
}

fn read_manifest(dir: &Path) -> Result<SplitManifest, CliError> {
    art::read_json(&dir.join(art::SPLIT))
}

/// Series reloaded from the config, checked against the split manifest.
fn reload(cfg: &PipelineConfig, manifest: &SplitManifest) -> Result<TimeSeries, CliError> {
    let (series, _) = load_dataset(cfg)?;
    if series.len() != manifest.len {
        return Err(CliError::Data {
            stage: Stage::Load,
            message: format!(
                "dataset has {} rows but the split manifest records {}",
                series.len(),
                manifest.len
            ),
        });
    }
    Ok(series)
}

fn labels_in(labels: &BTreeSet<usize>, range: std::ops::Range<usize>) -> BTreeSet<usize> {
    labels.range(range).copied().collect()
}

pub fn run_split(cfg: &PipelineConfig, dir: &Path) -> Result<SplitManifest, CliError> {
    cfg.validate()?;
    check_inputs(cfg)?;
    let (series, rejected_rows) = load_dataset(cfg)?;
    if rejected_rows > 0 {
        warn!(
            "{rejected_rows} rows rejected while loading {}",
            cfg.dataset.path.display()
        );
    }
    let parts = split(&series, &cfg.split).at(Stage::Split)?;
    let b = parts.boundaries;
    let labels = series.label_set();
    let manifest = SplitManifest {
        series_name: cfg.dataset.series_name(),
        len: b.len,
        rejected_rows,
        train_end: b.train_end,
        validation_end: b.validation_end,
        labeled_points: LabelCounts {
            train: labels.range(b.train()).count(),
            validation: labels.range(b.validation()).count(),
            test: labels.range(b.test()).count(),
        },
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    art::write_json(&dir.join(art::CONFIG), cfg)?;
    art::write_json(&dir.join(art::SPLIT), &manifest)?;
    info!(
        "split {}: train {}, validation {}, test {}",
        manifest.series_name,
        b.train().len(),
        b.validation().len(),
        b.test().len()
    );
    Ok(manifest)
}

/// Trains the forecaster. Returns `None` when errors come from a file.
pub fn run_train(dir: &Path) -> Result<Option<TrainReport>, CliError> {
    let cfg = read_config(dir)?;
    let Some(fc) = cfg.seeded_forecaster() else {
        info!("external errors configured; skipping training");
        return Ok(None);
    };
    let manifest = read_manifest(dir)?;
    let series = reload(&cfg, &manifest)?;
    let b = manifest.boundaries();
    let v = &series.values;
    let windows = |range: std::ops::Range<usize>, stride| {
        make_windows_strided(&v[range], fc.look_back, fc.look_ahead, stride).at(Stage::Train)
    };
    let train_w = windows(b.train(), fc.window_stride)?;
    let val_w = windows(b.validation(), 1)?;
    let (params, report) = train(&fc, &train_w, &val_w).at(Stage::Train)?;
    if !params.is_finite() {
        return Err(CliError::Core {
            stage: Stage::Train,
            source: lstm_evt_core::Error::Numerical("trained weights are not finite".into()),
        });
    }
    info!(
        "trained {} epochs, best validation MSE {:.3e} at epoch {}",
        report.epochs_run,
        report.best_validation_mse(),
        report.best_epoch
    );
    art::write_json(&dir.join(art::CHECKPOINT), &Checkpoint::new(fc, params))?;
    art::write_json(&dir.join(art::TRAIN_REPORT), &report)?;
    Ok(Some(report))
}

/// Writes the error stream, from the checkpoint or the external file.
pub fn run_errors(dir: &Path) -> Result<ErrorSeries, CliError> {
    let cfg = read_config(dir)?;
    let manifest = read_manifest(dir)?;
    let errors = match &cfg.external_errors {
        Some(path) => {
            let errors = art::read_errors(path)?;
            if let Some(&last) = errors.indices.last() {
                if last >= manifest.len {
                    return Err(CliError::Data {
                        stage: Stage::Errors,
                        message: format!(
                            "external error index {last} is outside a series of length {}",
                            manifest.len
                        ),
                    });
                }
            }
            errors
        }
        None => {
            let series = reload(&cfg, &manifest)?;
            let ck: Checkpoint = art::read_json(&dir.join(art::CHECKPOINT))?;
            let f = forecast(&ck.params, &series, &ck.config).at(Stage::Errors)?;
            if f.errors.errors.iter().any(|e| !e.is_finite()) {
                return Err(CliError::Core {
                    stage: Stage::Errors,
                    source: lstm_evt_core::Error::Numerical("non-finite prediction".into()),
                });
            }
            let rows: Vec<PredictionRow> = f
                .errors
                .indices
                .iter()
                .zip(&f.predicted)
                .map(|(&index, &predicted)| PredictionRow { index, predicted })
                .collect();
            art::write_csv(&dir.join(art::PREDICTIONS), &rows)?;
            f.errors
        }
    };
    art::write_errors(&dir.join(art::ERRORS), &errors)?;
    info!("{} prediction errors", errors.len());
    Ok(errors)
}

struct DetectInputs {
    cfg: PipelineConfig,
    manifest: SplitManifest,
    labels: BTreeSet<usize>,
    errors: ErrorSeries,
}

fn detect_inputs(dir: &Path) -> Result<DetectInputs, CliError> {
    let cfg = read_config(dir)?;
    let manifest = read_manifest(dir)?;
    let labels = reload(&cfg, &manifest)?.label_set();
    let errors = art::read_errors(&dir.join(art::ERRORS))?;
    Ok(DetectInputs {
        cfg,
        manifest,
        labels,
        errors,
    })
}

fn detection_rows(
    errors: &ErrorSeries,
    flags: &BTreeSet<usize>,
    score: impl Fn(f64) -> f64,
) -> Vec<DetectionRow> {
    errors
        .iter()
        .map(|(index, e)| DetectionRow {
            index,
            score: score(e),
            flagged: u8::from(flags.contains(&index)),
        })
        .collect()
}

/// Fits one detection rule and flags the test segment.
pub fn run_detect(dir: &Path, rule: Rule) -> Result<BTreeSet<usize>, CliError> {
    let DetectInputs {
        cfg,
        manifest,
        labels,
        errors,
    } = detect_inputs(dir)?;
    let b = manifest.boundaries();
    let test = errors.restrict(b.test());
    let det = &cfg.detectors;
    let (flags, rows) = match rule {
        Rule::Gaussian => {
            let mut fit: GaussianFit =
                fit_gaussian(&errors.restrict(b.train())).at(Stage::Detect)?;
            match det.gaussian.tau_g {
                Some(tau) => fit.tau_g = Some(tau),
                None => {
                    let search = search_tau_g(
                        &fit,
                        &errors.restrict(b.validation()),
                        &labels_in(&labels, b.validation()),
                        &cfg.matching,
                    )
                    .at(Stage::Detect)?;
                    info!("tau_g = {} (validation F1 {:.3})", search.tau_g, search.f1);
                    fit.tau_g = Some(search.tau_g);
                    art::write_json(&dir.join("gaussian_tuning.json"), &search)?;
                }
            }
            art::write_json(&dir.join(rule.fit_file()), &fit)?;
            let flags = detect_gaussian(&fit, &test).at(Stage::Detect)?;
            let rows = detection_rows(&test, &flags, |e| fit.log_pd(e));
            (flags, rows)
        }
        Rule::Evt => {
            let init = errors.restrict(0..b.validation_end);
            let evt = &det.evt;
            let fit: GpdFit = match evt.q {
                Some(q) => fit_pot(&init, evt.level, q).at(Stage::Detect)?,
                None => {
                    let cal: QCalibration = calibrate_q(
                        &init,
                        &labels_in(&labels, 0..b.validation_end),
                        &evt.q_grid,
                        evt.level,
                    )
                    .at(Stage::Detect)?;
                    art::write_json(&dir.join("evt_calibration.json"), &cal)?;
                    cal.fit
                }
            };
            info!("tau_e = {} at q = {}", fit.tau_e, fit.q);
            art::write_json(&dir.join(rule.fit_file()), &fit)?;
            let flags = detect_evt(&fit, &test).at(Stage::Detect)?;
            let rows = detection_rows(&test, &flags, |e| tail_probability(&fit, e).probability);
            (flags, rows)
        }
        Rule::Tukey => {
            let fit: TukeyFit =
                fit_tukey_values(&errors.errors, det.tukey.multiplier).at(Stage::Detect)?;
            info!("tau_t = {}", fit.tau_t);
            art::write_json(&dir.join(rule.fit_file()), &fit)?;
            let flags = detect_tukey(&fit, &test);
            let rows = detection_rows(&test, &flags, |e| e);
            (flags, rows)
        }
    };
    art::write_csv(&dir.join(rule.detections_file()), &rows)?;
    info!("{}: {} flags in the test segment", rule.name(), flags.len());
    Ok(flags)
}

/// Evenly spaced subsample of at most `max` values, order preserved.
pub fn thin(values: &[f64], max: usize) -> Vec<f64> {
    let n = values.len();
    if n <= max {
        return values.to_vec();
    }
    (0..max).map(|i| values[i * n / max]).collect()
}

/// Normality test on the error stream and GPD fit test on its tail.
pub fn run_tests(dir: &Path, which: &[Which]) -> Result<Vec<SeriesTestReport>, CliError> {
    let cfg = read_config(dir)?;
    let manifest = read_manifest(dir)?;
    let errors = art::read_errors(&dir.join(art::ERRORS))?;
    let b = manifest.boundaries();
    let alpha = cfg.tests.alpha;
    let mut out = Vec::new();
    for w in [Which::Sw, Which::Ad] {
        if !which.contains(&w) {
            continue;
        }
        let report = match w {
            Which::Sw => {
                let stream = match cfg.tests.normality_stream {
                    ErrorStream::All => errors.clone(),
                    ErrorStream::Train => errors.restrict(b.train()),
                };
                if stream.len() > SW_MAX_N {
                    info!(
                        "thinning {} errors to {SW_MAX_N} for Shapiro-Wilk",
                        stream.len()
                    );
                }
                shapiro_wilk(&thin(&stream.errors, SW_MAX_N)).at(Stage::Test)?
            }
            Which::Ad => {
                let init = errors.restrict(0..b.validation_end);
                let evt = &cfg.detectors.evt;
                let q = evt.q.unwrap_or(evt.q_grid[0]);
                let fit = fit_pot(&init, evt.level, q).at(Stage::Test)?;
                let excesses: Vec<f64> = init
                    .errors
                    .iter()
                    .filter(|&&e| e > fit.t)
                    .map(|&e| e - fit.t)
                    .collect();
                let boot = BootstrapConfig {
                    resamples: cfg.tests.bootstrap_resamples,
                    seed: cfg.seed,
                    force: false,
                };
                anderson_darling_gpd_with(&excesses, &fit.tail(), &boot).at(Stage::Test)?
            }
        }
        .with_alpha(alpha);
        info!(
            "{}: statistic {:.6}, p {}",
            report.test_name,
            report.statistic,
            report.p_value_display()
        );
        out.push(SeriesTestReport {
            series: manifest.series_name.clone(),
            report,
        });
    }
    art::write_json(&dir.join(art::TESTS), &out)?;
    Ok(out)
}

fn enabled_rules(cfg: &PipelineConfig) -> Vec<Rule> {
    let d = &cfg.detectors;
    Rule::ALL
        .into_iter()
        .filter(|r| match r {
            Rule::Gaussian => d.gaussian.enabled,
            Rule::Evt => d.evt.enabled,
            Rule::Tukey => d.tukey.enabled,
        })
        .collect()
}

/// Scores each enabled rule's test-segment flags against the labels.
pub fn run_evaluate(dir: &Path) -> Result<MetricsSummary, CliError> {
    let cfg = read_config(dir)?;
    let manifest = read_manifest(dir)?;
    let labels = labels_in(
        &reload(&cfg, &manifest)?.label_set(),
        manifest.boundaries().test(),
    );
    let rules = enabled_rules(&cfg);
    let mut detectors = Vec::new();
    for &rule in &rules {
        let rows: Vec<DetectionRow> = art::read_csv(&dir.join(rule.detections_file()))?;
        let flags = art::flags_of(&rows);
        let counts = match_detections(&flags, &labels, &cfg.matching);
        detectors.push(compute_metrics(counts).named(rule.name(), &manifest.series_name));
    }
    let tau_g = if rules.contains(&Rule::Gaussian) {
        art::read_json::<GaussianFit>(&dir.join(Rule::Gaussian.fit_file()))?.tau_g
    } else {
        None
    };
    let q = if rules.contains(&Rule::Evt) {
        Some(art::read_json::<GpdFit>(&dir.join(Rule::Evt.fit_file()))?.q)
    } else {
        None
    };
    let summary = MetricsSummary {
        series: manifest.series_name,
        detectors,
        tau_g,
        q,
    };
    art::write_json(&dir.join(art::METRICS_JSON), &summary)?;
    art::write_atomic(
        &dir.join(art::METRICS_TABLE),
        render_metrics(&summary).as_bytes(),
    )?;
    Ok(summary)
}

/// Plain-text table with one row per detector.
pub fn render_metrics(m: &MetricsSummary) -> String {
    let mut s = format!("series: {}\n", m.series);
    s.push_str(&format!(
        "{:<10} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}\n",
        "detector", "precision", "recall", "f1", "tp", "fp", "fn"
    ));
    for r in &m.detectors {
        s.push_str(&format!(
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6} {:>6}\n",
            r.detector_name,
            r.precision,
            r.recall,
            r.f1,
            r.counts.true_positives,
            r.counts.false_positives,
            r.counts.false_negatives
        ));
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v}"));
    s.push_str(&format!("tau_g: {}\nq: {}\n", opt(m.tau_g), opt(m.q)));
    s
}

#[derive(Debug, Serialize)]
struct PlotRow {
    index: usize,
    timestamp: i64,
    actual: f64,
    predicted: Option<f64>,
    error: Option<f64>,
    label: u8,
    gaussian_threshold: Option<f64>,
    evt_threshold: Option<f64>,
    tukey_threshold: Option<f64>,
    gaussian_flag: Option<u8>,
    evt_flag: Option<u8>,
    tukey_flag: Option<u8>,
}

/// Plot-ready CSV: series, predictions, errors, thresholds and flags.
///
/// Thresholds are on the error scale; the Gaussian one is the upper edge of
/// the band where `log_pd >= tau_g`. Flags are empty outside the test
/// segment.
pub fn run_report(dir: &Path) -> Result<usize, CliError> {
    let cfg = read_config(dir)?;
    let manifest = read_manifest(dir)?;
    let series = reload(&cfg, &manifest)?;
    let labels = series.label_set();
    let errors = art::read_errors(&dir.join(art::ERRORS))?;
    let predictions_path = dir.join(art::PREDICTIONS);
    let predictions: Vec<PredictionRow> = if predictions_path.is_file() {
        art::read_csv(&predictions_path)?
    } else {
        Vec::new()
    };
    let rules = enabled_rules(&cfg);
    let threshold = |rule: Rule| -> Result<Option<f64>, CliError> {
        if !rules.contains(&rule) {
            return Ok(None);
        }
        let p = dir.join(rule.fit_file());
        Ok(match rule {
            Rule::Gaussian => art::read_json::<GaussianFit>(&p)?.pass_band().map(|b| b.1),
            Rule::Evt => Some(art::read_json::<GpdFit>(&p)?.tau_e),
            Rule::Tukey => Some(art::read_json::<TukeyFit>(&p)?.tau_t),
        })
    };
    let flags = |rule: Rule| -> Result<Option<BTreeSet<usize>>, CliError> {
        if !rules.contains(&rule) {
            return Ok(None);
        }
        let rows: Vec<DetectionRow> = art::read_csv(&dir.join(rule.detections_file()))?;
        Ok(Some(art::flags_of(&rows)))
    };
    let th = [
        threshold(Rule::Gaussian)?,
        threshold(Rule::Evt)?,
        threshold(Rule::Tukey)?,
    ];
    let fl = [
        flags(Rule::Gaussian)?,
        flags(Rule::Evt)?,
        flags(Rule::Tukey)?,
    ];
    let test = manifest.boundaries().test();
    let flag_at = |k: usize, i: usize| {
        fl[k]
            .as_ref()
            .filter(|_| test.contains(&i))
            .map(|f| u8::from(f.contains(&i)))
    };
    let lookup = |indices: &[usize], i: usize| indices.binary_search(&i).ok();
    let pred_indices: Vec<usize> = predictions.iter().map(|p| p.index).collect();
    let rows: Vec<PlotRow> = (0..series.len())
        .map(|i| PlotRow {
            index: i,
            timestamp: series.timestamps[i],
            actual: series.values[i],
            predicted: lookup(&pred_indices, i).map(|k| predictions[k].predicted),
            error: lookup(&errors.indices, i).map(|k| errors.errors[k]),
            label: u8::from(labels.contains(&i)),
            gaussian_threshold: th[0],
            evt_threshold: th[1],
            tukey_threshold: th[2],
            gaussian_flag: flag_at(0, i),
            evt_flag: flag_at(1, i),
            tukey_flag: flag_at(2, i),
        })
        .collect();
    art::write_csv(&dir.join(art::PLOT), &rows)?;
    Ok(rows.len())
}

/// Runs every stage after the split in order.
pub fn run_downstream(dir: &Path) -> Result<MetricsSummary, CliError> {
    let cfg = read_config(dir)?;
    run_train(dir)?;
    run_errors(dir)?;
    for rule in enabled_rules(&cfg) {
        run_detect(dir, rule)?;
    }
    run_tests(dir, &[Which::Sw, Which::Ad])?;
    let summary = run_evaluate(dir)?;
    run_report(dir)?;
    Ok(summary)
}

/// Full pipeline into a staging directory next to the output, renamed into
/// place on success. On failure nothing is left behind.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<MetricsSummary, CliError> {
    cfg.validate()?;
    check_inputs(cfg)?;
    let out = &cfg.output_dir;
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".lstm-evt-staging-")
        .tempdir_in(&parent)
        .map_err(|e| CliError::io(&parent, e))?;
    run_split(cfg, staging.path())?;
    let summary = run_downstream(staging.path())?;
    if out.exists() {
        std::fs::remove_dir_all(out).map_err(|e| CliError::io(out, e))?;
    }
    let staged = staging.keep();
    if let Err(e) = std::fs::rename(&staged, out) {
        let _ = std::fs::remove_dir_all(&staged);
        return Err(CliError::io(out, e));
    }
    Ok(summary)
}
