//! Scenario runner, selftest battery and file formats around the
//! prediction core. The `chanpred` binary in this crate exposes the
//! `run`, `sweep` and `selftest` subcommands.

pub mod report;
pub mod runner;
pub mod selftest;
pub mod spec;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run error: {0}")]
    Run(String),
    #[error("io error: {0}")]
    Io(String),
}
