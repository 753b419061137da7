//! std companion to `iotgen-core`: file formats, a rayon job runner, an HTTP
//! chat-completions provider, run manifests and the `iotgen` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;
pub mod manifest;
pub mod runtime;
