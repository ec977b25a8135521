//! Scenario files, run and comparison drivers, replay, and metrics.
//!
//! A [`ScenarioConfig`] describes the cell, the slices, the traffic, the
//! initial policy and any scripted operator utterances. A [`Session`] wires
//! it to the simulator and the chosen controller and advances it one
//! simulated second at a time; [`run`], [`compare`] and [`replay`] are built
//! on top of it.

mod controllers;
mod metrics;
mod scenario;
mod session;

use thiserror::Error;

use crate::baselines::ControllerKind;
use crate::domain::ConfigError;
use crate::sim::{LogError, SimError};

pub use controllers::{AgenticController, BaselineController, IntentOutcome, RunController};
pub use metrics::{
    build_report, EventCounts, LatencyMinute, MetricsReport, PolicyPoint, SlicePhaseMetrics,
};
pub use scenario::{
    BridgeConfig, IntentLine, PhaseSpec, ScenarioConfig, REFERENCE_SCENARIO, SCENARIO_SCHEMA,
};
pub use session::{
    compare, recorded_intents, replay, run, ComparisonTable, ReplayResult, RunOutput, Session,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("the {} controller has no strategic tier", .0.as_str())]
    NoStrategicTier(ControllerKind),
    #[error("run already finished at t = {0} s")]
    Finished(u64),
}
