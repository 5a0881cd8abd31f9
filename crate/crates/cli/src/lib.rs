//! Experiment harness for the memristive LSM simulator: configuration,
//! synthetic data generation, dataset ingestion, orchestration of the
//! train/eval/zero-shot/sweep/ablation/cost pipelines, and machine-readable
//! outputs. The `lsmsim` binary is a thin shell over this library.

pub mod commands;
pub mod config;
pub mod data;
pub mod output;
pub mod pipeline;
pub mod studies;
pub mod synth;
pub mod zeroshot;
