//! Command-line pipeline: cohort synthesis, training, evaluation, the
//! repeated-split benchmark, gradient checks and prediction, plus the
//! checkpoint container and run manifests.

pub mod checkpoint;
pub mod commands;
pub mod manifest;

pub use checkpoint::{Checkpoint, Container};
pub use manifest::RunManifest;
