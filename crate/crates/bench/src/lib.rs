//! Criterion benchmarks for the detection rules; see `benches/detectors.rs`.
