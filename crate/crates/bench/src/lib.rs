//! Criterion benchmarks for the fbms toolkit; see `benches/kernels.rs`.
