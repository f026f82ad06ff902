//! Criterion benchmarks for the fitting and scoring hot paths; see `benches/`.
