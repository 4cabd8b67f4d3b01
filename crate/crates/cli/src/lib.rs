//! Command line, reward service and scorer client around `termalign-core`.

pub mod client;
pub mod commands;
pub mod mock;
pub mod service;
