//! Scan orchestration: run configuration, command implementations, and
//! deterministic artifact emission (CSV tables, SVG plots, a checksummed
//! run manifest).

pub mod commands;
pub mod config;
pub mod csv;
pub mod manifest;
pub mod svg;
