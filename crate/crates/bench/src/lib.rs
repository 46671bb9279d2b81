//! Criterion benchmarks for the checker and the runtime; see `benches/`.
