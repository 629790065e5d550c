//! Experiment harness, configuration files, CSV output and the command line
//! for the `drams-core` router.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
