//! Library side of the `blocksim` command: argument resolution, execution
//! and run manifests.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod request;
