//! Batch front end for the `anderson-corr` expansion: configuration, command
//! dispatch and JSON/CSV emission.

pub mod config;
pub mod run;

pub use config::{Cli, CommandKind, Format, Grid, Point, Resolved, RunConfig, THREADS_ENV};
pub use run::{run, Status};
