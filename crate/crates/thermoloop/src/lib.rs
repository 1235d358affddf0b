//! Host-side companion to `thermoloop-core`: telemetry and scenario file
//! formats, operator command parsing, the live HTTP session and the CLI.

pub mod cli;
pub mod command;
pub mod live;
pub mod scenario_file;
pub mod telemetry;

pub use thermoloop_core as core;
