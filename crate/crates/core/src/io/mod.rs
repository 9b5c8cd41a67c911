//! File formats, configuration and metrics reporting.

pub mod archive;
pub mod config;
pub mod report;
