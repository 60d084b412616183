//! Datasets, bank files, reports and the command-line harness around
//! `pointgn-core`.

pub mod bank_file;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod hdf5;
pub mod pipeline;
pub mod report;
pub mod settings;
pub mod sweep;
pub mod synthetic;

pub use error::{Error, Result};
