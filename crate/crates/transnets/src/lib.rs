//! File formats, checkpoints and the `transnets` command line over
//! [`transnets_core`].

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod dataset;
pub mod embedding_file;
pub mod error;
pub mod experiment;
pub mod records;
pub mod report;

pub use error::{Error, ErrorCode, Result};
