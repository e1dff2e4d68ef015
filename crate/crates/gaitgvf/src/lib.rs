//! Std companion to `gaitgvf-core`: session and checkpoint files, TOML
//! configuration, CSV reports and the multi-seed comparison behind the
//! `gaitgvf` command.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod session_io;

pub use config::Config;
pub use error::{Error, Result};
