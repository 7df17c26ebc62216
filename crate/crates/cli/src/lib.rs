//! Configuration-driven workflows over the `crater_sr` library: training and
//! applying the super-resolution model, post-processing detector output,
//! combining models, evaluating against a catalog, searching thresholds and
//! generating synthetic fixtures.
//!
//! Every command takes a validated [`RunConfig`], writes its outputs
//! atomically under the configured output directory and stamps them with a
//! [`Provenance`] line.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_combine, cmd_evaluate, cmd_gridsearch, cmd_postprocess, cmd_sr, cmd_synth, cmd_train_sr, config_targets,
    exit_code, SrTarget, SynthOutcome, TrainOutcome,
};
pub use config::{Overrides, RunConfig};
pub use output::Provenance;
