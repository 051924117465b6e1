//! Reproducible experiments driven by TOML configs.
//!
//! Every artifact is a pure function of the config (including its seed);
//! parallel work is reduced in a fixed order, so the output bytes do not
//! depend on the number of worker threads.

pub mod config;
pub mod run;

pub use config::{ExperimentConfig, StudySettings, TheorySpec};
pub use run::{run, theory_exponent, with_jobs, Artifact, RunOutput};
