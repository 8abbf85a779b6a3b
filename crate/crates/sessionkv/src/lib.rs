//! IO-flavoured companion to `sessionkv-core`: workload generation, the
//! multi-worker benchmark harness with in-memory and UDP transports,
//! CSV reporting, and the program-file parser behind the CLI.

pub mod bench;
pub mod programs;
pub mod report;
pub mod stats;
pub mod wire;
pub mod workload;

pub use sessionkv_core as core;
