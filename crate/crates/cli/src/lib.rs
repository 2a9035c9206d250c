//! Command-line front end for `qnetsense`: configuration files, grid
//! specifications, CSV tables and the subcommand bodies.

pub mod commands;
pub mod config;
pub mod grid;
pub mod table;

pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use grid::{parse_grid, Grid, GridError};
pub use table::{read_sweep, SweepRecord, Table};
