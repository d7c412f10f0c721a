//! Support modules for the command-line driver, exposed as a library so
//! integration tests can reuse the file formats.

pub mod config;
pub mod csvio;
pub mod svg;
