//! Benchmark harness for `mandel-core`; see `benches/`.
