//! Command-line verbs and the live HTTP control surface for slicelab.
//!
//! [`commands`] holds the clap definitions and the verb implementations;
//! [`serve`] runs a scenario in (dilated) real time behind an HTTP API with
//! a server-sent KPM stream.

pub mod commands;
pub mod serve;

pub use commands::{execute, Cli, CliError, ScenarioArgs, Verb};
