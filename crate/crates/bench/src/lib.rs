//! Criterion benchmarks for the numeric kernels of `sim2real-core`; run with
//! `cargo bench -p sim2real-bench`. The library itself is empty.
