//! Criterion benchmarks for the sampling kernels; see `benches/`.
