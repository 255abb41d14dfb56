//! Criterion benchmarks for the cost engine, the Monte Carlo loop and AHP; see `benches/`.
