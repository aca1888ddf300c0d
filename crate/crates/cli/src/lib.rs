//! Config files, commands, convergence CSV and SVG plots behind the
//! `galbrun` binary.
//!
//! Exit codes: 0 success, 2 config error, 3 IO error, 4 solver error.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod records;
