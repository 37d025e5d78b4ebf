//! Criterion benchmarks for the protocol crate. See `benches/`.
