//! Criterion benchmarks for the estimation kernels; see `benches/`.
