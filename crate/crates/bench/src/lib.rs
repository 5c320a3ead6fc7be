//! Criterion benchmarks for the resonance engines; see `benches/`.
