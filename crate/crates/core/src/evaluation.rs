//! Matching detector flags against labels and precision / recall / F1.
//!
//! Labels are grouped into events: with `group_runs` a maximal run of
//! consecutive labeled indices is one event (an anomalous subsequence),
//! otherwise every labeled index is its own event. Any number of flags inside
//! an event detect it once and are not false positives. Remaining events are
//! matched greedily, nearest first, to at most one remaining flag within
//! `tolerance` steps.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpec {
    pub tolerance: usize,
    pub group_runs: bool,
}

impl Default for MatchSpec {
    fn default() -> Self {
        Self {
            tolerance: 0,
            group_runs: true,
        }
    }
}

impl MatchSpec {
    pub fn with_tolerance(tolerance: usize) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

/// Inclusive index range of one labeled anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelEvent {
    pub start: usize,
    pub end: usize,
}

impl LabelEvent {
    fn distance(&self, i: usize) -> usize {
        if i < self.start {
            self.start - i
        } else {
            i.saturating_sub(self.end)
        }
    }
}

pub fn label_events(labels: &BTreeSet<usize>, group_runs: bool) -> Vec<LabelEvent> {
    let mut events: Vec<LabelEvent> = Vec::new();
    for &i in labels {
        match events.last_mut() {
            Some(e) if group_runs && e.end + 1 == i => e.end = i,
            _ => events.push(LabelEvent { start: i, end: i }),
        }
    }
    events
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

pub fn match_detections(
    flags: &BTreeSet<usize>,
    labels: &BTreeSet<usize>,
    spec: &MatchSpec,
) -> ConfusionCounts {
    let events = label_events(labels, spec.group_runs);
    let mut detected = vec![false; events.len()];
    let mut free: Vec<usize> = Vec::new();

    for &f in flags {
        let k = events.partition_point(|e| e.end < f);
        match events.get(k) {
            Some(e) if e.start <= f => detected[k] = true,
            _ => free.push(f),
        }
    }

    // candidate (distance, event, flag) pairs among unmatched events
    let mut pairs = Vec::new();
    if spec.tolerance > 0 {
        for (fi, &f) in free.iter().enumerate() {
            let lo = f.saturating_sub(spec.tolerance);
            let first = events.partition_point(|e| e.end < lo);
            for (k, e) in events.iter().enumerate().skip(first) {
                if e.start > f + spec.tolerance {
                    break;
                }
                if !detected[k] {
                    pairs.push((e.distance(f), k, fi));
                }
            }
        }
    }
    pairs.sort_unstable();
    let mut flag_used = vec![false; free.len()];
    for (_, k, fi) in pairs {
        if !detected[k] && !flag_used[fi] {
            detected[k] = true;
            flag_used[fi] = true;
        }
    }

    let tp = detected.iter().filter(|&&d| d).count();
    ConfusionCounts {
        true_positives: tp,
        false_positives: flag_used.iter().filter(|&&u| !u).count(),
        false_negatives: events.len() - tp,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub detector_name: String,
    pub series_name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    /// Set when TP + FP = 0 or TP + FN = 0, making a ratio 0/0.
    pub degenerate: bool,
}

pub fn compute_metrics(counts: ConfusionCounts) -> MetricsReport {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let tp = counts.true_positives;
    let precision = ratio(tp, tp + counts.false_positives);
    let recall = ratio(tp, tp + counts.false_negatives);
    MetricsReport {
        detector_name: String::new(),
        series_name: String::new(),
        precision,
        recall,
        f1: f1_score(precision, recall),
        counts,
        degenerate: tp + counts.false_positives == 0 || tp + counts.false_negatives == 0,
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl MetricsReport {
    pub fn named(mut self, detector: impl Into<String>, series: impl Into<String>) -> Self {
        self.detector_name = detector.into();
        self.series_name = series.into();
        self
    }
}
