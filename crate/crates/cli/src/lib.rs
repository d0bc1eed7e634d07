//! Command-line driver for BRIDGE.
//!
//! - [`config`]: the TOML run configuration.
//! - [`backends`]: synthetic and external evaluators, generators, embedders.
//! - [`output`]: run directories, locks, manifests and ledgers.
//! - [`optimize`], [`analyze`], [`report`]: the subcommands.
//! - [`chart`]: SVG rendering of sweeps.

pub mod analyze;
pub mod backends;
pub mod chart;
pub mod config;
pub mod optimize;
pub mod output;
pub mod report;
