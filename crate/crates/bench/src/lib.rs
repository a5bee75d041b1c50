//! Benchmarks for the texturing pipeline live in `benches/`.
