//! Support library of the `uplimit` binary: configuration layering, artifact
//! envelopes, the run manifest, and the pipeline stages themselves. Kept as
//! a library so integration tests drive the exact code the binary runs.

pub mod artifacts;
pub mod config;
pub mod manifest;
pub mod stages;
