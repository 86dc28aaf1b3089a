//! File formats, run directories, figures and command plumbing around
//! `hmdim-core`.

pub mod config;
pub mod csvio;
pub mod error;
pub mod persist;
pub mod run;
pub mod svg;

pub use error::{CliError, Result};
