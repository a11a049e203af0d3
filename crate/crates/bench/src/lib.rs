//! Criterion benchmarks for the estimation and balancing pipeline; see `benches/`.
