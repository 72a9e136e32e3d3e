//! Experiment harness for partial visual-tactile fused clustering.
//!
//! The binary (`gpvtf`) exposes four subcommands — `synth`, `train`,
//! `sweep`, `eval` — all implemented here as library functions so the
//! acceptance and CLI test suites can call them in-process.

pub mod baselines;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod svg;
