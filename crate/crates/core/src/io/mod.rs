//! Configuration, snapshot and certificate files.

pub mod certificate;
pub mod config;
pub mod snapshot;
