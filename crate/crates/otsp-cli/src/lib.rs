//! Library half of the CLI crate: baseline construction, verification
//! helpers and the benchmark harness.
