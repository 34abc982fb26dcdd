//! Criterion benchmarks for the expression and form kernels; see `benches/`.
