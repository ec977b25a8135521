use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::controllers::{IntentOutcome, RunController};
use super::metrics::{build_report, MetricsReport};
use super::scenario::{IntentLine, ScenarioConfig};
use super::HarnessError;
use crate::baselines::ControllerKind;
use crate::domain::{ConfigError, KpmRecord, PolicyObject};
use crate::governance::GovernanceView;
use crate::sim::{EventKind, EventLog, SimState};

/// A run advanced one simulated second at a time.
pub struct Session {
    config: ScenarioConfig,
    sim: SimState,
    controller: RunController,
    log: EventLog,
    now: u64,
}

impl Session {
    pub fn new(config: ScenarioConfig) -> Result<Self, HarnessError> {
        let controller = RunController::for_scenario(&config);
        Self::with_controller(config, controller)
    }

    /// A session driven by a caller-built controller.
    pub fn with_controller(
        config: ScenarioConfig,
        controller: RunController,
    ) -> Result<Self, HarnessError> {
        config.validate()?;
        let sim = SimState::new(&config.sim_setup())?;
        let log = EventLog::new(config.options.log_detail);
        Ok(Self {
            config,
            sim,
            controller,
            log,
            now: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Last completed second.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn finished(&self) -> bool {
        self.now >= self.config.duration_s
    }

    /// Advances one second and returns the KPM batch emitted at its end.
    pub fn step(&mut self) -> Result<Vec<KpmRecord>, HarnessError> {
        if self.finished() {
            return Err(HarnessError::Finished(self.now));
        }
        let from = self.log.len();
        self.sim
            .run_until(self.now + 1, &mut self.controller, &mut self.log)?;
        self.now += 1;
        Ok(self.log.events()[from..]
            .iter()
            .filter(|e| e.kind == EventKind::Kpm)
            .filter_map(|e| serde_json::from_value(e.payload.clone()).ok())
            .collect())
    }

    /// Runs the remaining seconds.
    pub fn run_to_end(&mut self) -> Result<(), HarnessError> {
        if !self.finished() {
            self.sim
                .run_until(self.config.duration_s, &mut self.controller, &mut self.log)?;
            self.now = self.config.duration_s;
        }
        Ok(())
    }

    /// Schedules an utterance for the next second boundary and returns that
    /// time.
    pub fn queue_intent(&mut self, utterance: &str) -> Result<f64, HarnessError> {
        let t = (self.now + 1) as f64;
        self.schedule_intent(IntentLine {
            t,
            utterance: utterance.into(),
        })?;
        Ok(t)
    }

    /// Schedules an utterance for the first boundary at or after `line.t`
    /// (and after the current time). Unlike scenario scripts, utterances
    /// outside the grammar are accepted here and rejected when applied.
    pub fn schedule_intent(&mut self, line: IntentLine) -> Result<(), HarnessError> {
        let agent = self
            .controller
            .agentic_mut()
            .ok_or(HarnessError::NoStrategicTier(self.config.controller))?;
        agent.enqueue_intent(line);
        Ok(())
    }

    /// Outcomes of every utterance handled so far, in order.
    pub fn outcomes(&self) -> &[IntentOutcome] {
        self.controller.agentic().map_or(&[], |a| a.outcomes())
    }

    pub fn policy(&self) -> Option<&PolicyObject> {
        self.controller.policy()
    }

    pub fn governance(&self) -> Option<GovernanceView> {
        self.controller.governance_view()
    }

    pub fn controller(&self) -> &RunController {
        &self.controller
    }

    pub fn report(&self) -> MetricsReport {
        build_report(&self.config, &self.log)
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_output(self) -> RunOutput {
        RunOutput {
            report: build_report(&self.config, &self.log),
            log: self.log,
        }
    }
}

pub struct RunOutput {
    pub report: MetricsReport,
    pub log: EventLog,
}

/// Runs a scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    let mut s = Session::new(config.clone())?;
    s.run_to_end()?;
    Ok(s.into_output())
}

/// One row per slice and phase, one column group per controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub reports: Vec<MetricsReport>,
}

impl ComparisonTable {
    pub fn report(&self, kind: ControllerKind) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.controller == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "controller",
            "phase",
            "slice_id",
            "mean_throughput_mbps",
            "p95_delay_ms",
            "mean_buffer_bytes",
            "mean_efficiency",
        ])
        .expect("in-memory write");
        for r in &self.reports {
            for m in &r.slices {
                w.write_record([
                    r.controller.as_str().to_string(),
                    m.phase.clone(),
                    m.slice_id.to_string(),
                    format!("{:.4}", m.mean_throughput),
                    format!("{:.3}", m.p95_delay),
                    format!("{:.1}", m.mean_buffer),
                    format!("{:.4}", m.mean_efficiency),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Human-readable summary table.
    pub fn to_pretty(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.reports.first() else {
            return out;
        };
        let _ = write!(out, "{:<10} {:>5}", "phase", "slice");
        for r in &self.reports {
            let _ = write!(out, " | {:^26}", r.controller.as_str());
        }
        out.push('\n');
        let _ = write!(out, "{:<10} {:>5}", "", "");
        for _ in &self.reports {
            let _ = write!(out, " | {:>8} {:>8} {:>8}", "Mbit/s", "p95 ms", "eff");
        }
        out.push('\n');
        for (i, m) in first.slices.iter().enumerate() {
            let _ = write!(out, "{:<10} {:>5}", m.phase, m.slice_id);
            for r in &self.reports {
                let c = &r.slices[i];
                let _ = write!(
                    out,
                    " | {:>8.2} {:>8.1} {:>8.3}",
                    c.mean_throughput, c.p95_delay, c.mean_efficiency
                );
            }
            out.push('\n');
        }
        out.push('\n');
        for r in &self.reports {
            let _ = writeln!(
                out,
                "{:<26} efficiency {:.4}  latency-minute violations {:.3}  floor violations {}",
                r.controller.as_str(),
                r.overall_efficiency,
                r.latency_violation_fraction,
                r.floor_violations
            );
        }
        out
    }
}

/// Runs the same scenario under each controller.
pub fn compare(
    config: &ScenarioConfig,
    kinds: &[ControllerKind],
) -> Result<ComparisonTable, HarnessError> {
    if kinds.len() < 2 {
        return Err(ConfigError::new(
            "too_few_controllers",
            "controllers",
            "compare needs at least two controllers",
        )
        .into());
    }
    let reports = kinds
        .iter()
        .map(|&k| {
            let cfg = ScenarioConfig {
                controller: k,
                ..config.clone()
            };
            run(&cfg).map(|o| o.report)
        })
        .collect::<Result<_, _>>()?;
    Ok(ComparisonTable { reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub matches: bool,
    pub recorded_digest: String,
    pub replayed_digest: String,
    /// Index of the first differing event, if any.
    pub first_divergence: Option<usize>,
    pub intents: Vec<IntentLine>,
}

/// Utterances recorded in a log with the time they were applied.
pub fn recorded_intents(log: &EventLog) -> Vec<IntentLine> {
    log.events()
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Intent | EventKind::IntentRejected))
        .filter_map(|e| {
            e.payload
                .get("utterance")
                .and_then(|u| u.as_str())
                .map(|u| IntentLine {
                    t: e.t,
                    utterance: u.to_string(),
                })
        })
        .collect()
}

/// Re-executes a recorded run from its scenario and the utterances found in
/// its log, then compares the two logs.
pub fn replay(config: &ScenarioConfig, recorded: &EventLog) -> Result<ReplayResult, HarnessError> {
    let intents = recorded_intents(recorded);
    let last_kpm = recorded
        .of_kind(EventKind::Kpm)
        .last()
        .map_or(config.duration_s, |e| e.t.round() as u64);
    let cfg = ScenarioConfig {
        intents: Vec::new(),
        duration_s: last_kpm.max(1),
        phases: Vec::new(),
        ..config.clone()
    };
    let mut session = Session::new(cfg)?;
    for line in &intents {
        session.schedule_intent(line.clone())?;
    }
    session.run_to_end()?;
    let out = session.into_output();
    let first_divergence = recorded
        .events()
        .iter()
        .zip(out.log.events())
        .position(|(a, b)| a != b)
        .or_else(|| (recorded.len() != out.log.len()).then(|| recorded.len().min(out.log.len())));
    let recorded_digest = recorded.digest();
    let replayed_digest = out.log.digest();
    Ok(ReplayResult {
        matches: recorded_digest == replayed_digest,
        recorded_digest,
        replayed_digest,
        first_divergence,
        intents,
    })
}
