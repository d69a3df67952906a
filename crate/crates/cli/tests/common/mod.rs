#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const LEN: usize = 1200;

/// Anomalous runs: two in validation, two in test under the default split.
pub const ANOMALIES: [(usize, usize); 4] = [(650, 652), (800, 801), (950, 952), (1100, 1101)];

/// Noisy sine with level shifts on the anomalous runs.
pub fn write_dataset(path: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut s = String::from("timestamp,value,label\n");
    for i in 0..LEN {
        let anomalous = ANOMALIES.iter().any(|&(a, b)| (a..=b).contains(&i));
        let mut v = 10.0 + 3.0 * (2.0 * std::f64::consts::PI * i as f64 / 50.0).sin();
        v += noise.sample(&mut rng);
        if anomalous {
            v += 6.0;
        }
        s.push_str(&format!("{},{v},{}\n", i * 300, u8::from(anomalous)));
    }
    std::fs::write(path, s).unwrap();
}

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lstm-evt"));
    c.env_remove("LSTM_EVT_OUTPUT_ROOT");
    c
}

/// Small model settings that train in well under a second.
pub const MODEL_FLAGS: &[&str] = &[
    "--layers",
    "8",
    "--look-back",
    "5",
    "--max-epochs",
    "8",
    "--batch-size",
    "32",
    "--learning-rate",
    "0.01",
    "--dropout",
    "0.1",
];

/// Settings shared by every run regardless of the error source.
pub const RUN_FLAGS: &[&str] = &["--bootstrap-resamples", "199", "--seed", "3"];

pub fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn lstm-evt");
    if !out.status.success() {
        panic!(
            "lstm-evt failed ({}):\n{}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

/// Pipeline run with `source` selecting the error source.
pub fn pipeline_from(data: &Path, out: &Path, source: &[&str]) -> Output {
    run(bin()
        .arg("pipeline")
        .arg("--data")
        .arg(data)
        .arg("--output-dir")
        .arg(out)
        .args(RUN_FLAGS)
        .args(source))
}

/// Pipeline run training the small model.
pub fn pipeline(data: &Path, out: &Path) -> Output {
    pipeline_from(data, out, MODEL_FLAGS)
}

/// File names in `dir`, sorted.
pub fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

/// Names of files whose bytes differ between two directories.
pub fn differing(a: &Path, b: &Path, skip: &[&str]) -> Vec<String> {
    assert_eq!(listing(a), listing(b), "different artifact sets");
    listing(a)
        .into_iter()
        .filter(|f| !skip.contains(&f.as_str()))
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect()
}
