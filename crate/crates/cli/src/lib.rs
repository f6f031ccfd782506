//! IO, file formats, checkpointing, and experiment orchestration around
//! `kvmem-core`: the std companion to the no_std model crate.

pub mod checkpoint;
pub mod commands;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod ladder;

pub use error::{CliError, Result};
