//! Helpers shared by the integration test targets.

// Each test binary compiles this module separately and uses its own
// subset, so per-binary dead-code findings are noise.
#![allow(dead_code)]

pub mod oracle;
