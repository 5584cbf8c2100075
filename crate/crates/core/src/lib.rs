//! Behavioral-report ingestion, preprocessing, and deep-Q-learning attribution
//! of malware samples to APT groups.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`ingest`]: parse manifest + sandbox/antivirus report files into feature
//!   vectors,
//! - [`pipeline`]: label encoding, stratified splitting, SMOTE oversampling,
//!   min-max normalization,
//! - [`mdp_env`]: a reset/step environment presenting a split as a
//!   sequential-decision problem,
//! - [`qlearn`]: from-scratch deep Q-network (policy/target MLPs, replay
//!   memory, schedules, training loop),
//! - [`baselines`]: classical classifiers trained on the same splits,
//! - [`eval`]: confusion-matrix metrics and report emission,
//! - [`synthgen`]: synthetic corpora (raw report documents and feature
//!   matrices) for desk-scale experiments.

pub mod baselines;
pub mod config;
pub mod data;
pub mod eval;
pub mod ingest;
pub mod mdp_env;
pub mod pipeline;
pub mod qlearn;
pub mod synthgen;
pub mod util;
