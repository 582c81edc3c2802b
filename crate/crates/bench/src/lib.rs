//! Criterion benchmarks for the clustering and classification kernels live in `benches/`.
