//! Driver for parameter sweeps over the qprobe library: TOML run
//! configurations, a worker pool, and hashed result manifests.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod pool;
