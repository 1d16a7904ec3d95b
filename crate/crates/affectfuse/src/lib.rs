//! Files, experiment runner and command line around `affectfuse-core`.

pub mod checkpoint;
pub mod cli;
pub mod clips;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod scores;

pub use error::{Error, Result};
