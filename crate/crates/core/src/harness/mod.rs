//! Experiment orchestration: configuration, seeded runs and export.

pub mod config;
pub mod experiment;
pub mod export;

pub use config::{ExperimentConfig, ExperimentKind, Preset, SeedLayout, Variant};
pub use experiment::{
    evaluate_actor, run_experiment, run_variant, ExperimentResult, ReferenceSets, RunResult, Summary,
};
pub use export::{export, load_verified_summary};
