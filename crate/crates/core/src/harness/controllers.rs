use std::collections::VecDeque;

use super::scenario::{IntentLine, ScenarioConfig};
use crate::baselines::{
    heuristic_alloc, reactive_alloc, static_alloc, ControllerKind, HeuristicWeights,
};
use crate::bridge::{Connector, HttpConnector};
use crate::domain::{AllocationDecision, KpmRecord, PolicyObject};
use crate::governance::{GovernanceEngine, GovernanceView};
use crate::sim::{ControlOutput, Controller, EventLog};
use crate::strategic::{IntentAck, IntentError, StrategicAgent, StrategicConfig};
use crate::tactical::{DemandModel, KpmWindow, TacticalAgent, TacticalConfig};

/// Static, heuristic or reactive comparison controller.
pub struct BaselineController {
    kind: ControllerKind,
    window: KpmWindow,
    model: DemandModel,
    weights: HeuristicWeights,
    cost_ms: f64,
    budget_ms: f64,
    decided: bool,
}

impl BaselineController {
    pub fn new(kind: ControllerKind, config: &ScenarioConfig) -> Self {
        let ids: Vec<_> = config.slices.iter().map(|s| s.slice_id).collect();
        let drain = if kind == ControllerKind::ReactiveFixedObjective {
            config.tactical.ml_drain_horizon_s
        } else {
            config.tactical.drain_horizon_s
        };
        Self {
            kind,
            window: KpmWindow::new(&ids),
            model: DemandModel {
                drain_horizon_s: drain,
                bytes_per_prb_per_second: ids
                    .iter()
                    .map(|&id| config.radio.bytes_per_prb_per_second(id))
                    .collect(),
                total_prb: config.radio.total_prb,
            },
            weights: config.tactical.heuristic,
            cost_ms: config.tactical.decision_cost_ms,
            budget_ms: config.tactical.budget_ms,
            decided: false,
        }
    }
}

impl Controller for BaselineController {
    fn id(&self) -> &str {
        self.kind.as_str()
    }

    fn budget_ms(&self) -> f64 {
        self.budget_ms
    }

    fn observe(&mut self, _t: f64, batch: &[KpmRecord], _log: &mut EventLog) {
        let _ = self.window.update(batch);
    }

    fn decide(&mut self, t: f64, _log: &mut EventLog) -> ControlOutput {
        let caps = match self.kind {
            ControllerKind::StaticEqual if !self.decided => static_alloc(
                self.model.bytes_per_prb_per_second.len(),
                self.model.total_prb,
            ),
            ControllerKind::Heuristic if !self.window.is_empty() => {
                heuristic_alloc(&self.window, &self.model, &self.weights)
            }
            ControllerKind::ReactiveFixedObjective if !self.window.is_empty() => {
                reactive_alloc(&self.window, &self.model)
            }
            _ => return ControlOutput::none(0.0),
        };
        self.decided = true;
        ControlOutput {
            decision: Some(AllocationDecision {
                t,
                cap_prb: caps,
                policy_version: 0,
                controller_id: self.kind.as_str().into(),
                arbitration_trace: Vec::new(),
            }),
            elapsed_ms: self.cost_ms,
            weights: None,
        }
    }
}

/// Outcome of one operator utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentOutcome {
    pub t: f64,
    pub utterance: String,
    pub result: Result<IntentAck, IntentError>,
}

/// The full agentic control plane: tactical agent every second, strategic
/// agent every minute, governance alongside.
pub struct AgenticController {
    tactical: TacticalAgent,
    strategic: StrategicAgent,
    governance: GovernanceEngine,
    pending: VecDeque<IntentLine>,
    outcomes: Vec<IntentOutcome>,
    in_force: Vec<u32>,
}

impl AgenticController {
    /// Builds the control plane; bridges come from the scenario's bridge
    /// section (or the URL environment override).
    pub fn new(config: &ScenarioConfig) -> Self {
        let connector = || -> Option<Box<dyn Connector>> {
            let b = config.bridge.as_ref()?;
            HttpConnector::from_config(b.url.as_deref()).map(|c| Box::new(c) as Box<dyn Connector>)
        };
        let tactical = if config.bridge.as_ref().is_some_and(|b| b.tactical) {
            connector()
        } else {
            None
        };
        Self::with_connectors(config, connector(), tactical)
    }

    /// Builds the control plane with explicit strategic and tactical
    /// connectors.
    pub fn with_connectors(
        config: &ScenarioConfig,
        strategic_bridge: Option<Box<dyn Connector>>,
        tactical_bridge: Option<Box<dyn Connector>>,
    ) -> Self {
        let ids: Vec<_> = config.slices.iter().map(|s| s.slice_id).collect();
        let guard = config.guardrail_set();
        let total = config.radio.total_prb;
        let initial = static_alloc(ids.len(), total);
        let bpps = ids
            .iter()
            .map(|&id| config.radio.bytes_per_prb_per_second(id))
            .collect();
        let tactical_cfg = TacticalConfig {
            bridge_deadline_ms: config
                .bridge
                .as_ref()
                .map_or(config.tactical.bridge_deadline_ms, |b| {
                    b.tactical_deadline_ms
                }),
            ..config.tactical.clone()
        };
        let mut tactical =
            TacticalAgent::new(&ids, bpps, initial.clone(), guard.clone(), tactical_cfg);
        let strategic_cfg = StrategicConfig {
            bridge_deadline_ms: config
                .bridge
                .as_ref()
                .map_or(config.strategic.bridge_deadline_ms, |b| {
                    b.strategic_deadline_ms
                }),
            ..config.strategic.clone()
        };
        let mut strategic = StrategicAgent::new(
            config.initial_policy(),
            &config.slices,
            guard,
            strategic_cfg,
        );
        if let Some(c) = strategic_bridge {
            strategic = strategic.with_bridge(c);
        }
        if let Some(c) = tactical_bridge {
            tactical = tactical.with_bridge(c);
        }
        let mut pending: Vec<IntentLine> = config.intents.clone();
        pending.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self {
            tactical,
            strategic,
            governance: GovernanceEngine::new(config.governance.clone(), config.drift),
            pending: pending.into(),
            outcomes: Vec::new(),
            in_force: initial,
        }
    }

    pub fn tactical(&self) -> &TacticalAgent {
        &self.tactical
    }

    pub fn strategic(&self) -> &StrategicAgent {
        &self.strategic
    }

    pub fn governance(&self) -> &GovernanceEngine {
        &self.governance
    }

    pub fn outcomes(&self) -> &[IntentOutcome] {
        &self.outcomes
    }

    /// Queues an utterance for the first second boundary at or after `t`.
    pub fn enqueue_intent(&mut self, line: IntentLine) {
        let at = self.pending.partition_point(|p| p.t <= line.t);
        self.pending.insert(at, line);
    }
}

impl Controller for AgenticController {
    fn id(&self) -> &str {
        "agentic"
    }

    fn budget_ms(&self) -> f64 {
        self.tactical.config().budget_ms
    }

    fn observe(&mut self, t: f64, batch: &[KpmRecord], log: &mut EventLog) {
        self.strategic
            .record_second(self.tactical.snapshot(), batch, &self.in_force);
        let _ = self.tactical.observe(batch);
        self.governance.advance(t, log);
        self.governance.observe_kpm(t, batch, log);
        while self.pending.front().is_some_and(|p| p.t <= t) {
            let line = self.pending.pop_front().expect("front checked");
            let result = self
                .strategic
                .submit_intent(&line.utterance, t, &self.tactical, log);
            self.outcomes.push(IntentOutcome {
                t,
                utterance: line.utterance,
                result,
            });
        }
        if (t.round() as u64).is_multiple_of(60) {
            self.strategic
                .on_minute(t, &mut self.tactical, &mut self.governance, log);
        }
    }

    fn decide(&mut self, t: f64, log: &mut EventLog) -> ControlOutput {
        let out = self.tactical.decide(t, self.strategic.policy(), log);
        if let Some(d) = &out.decision {
            if out.elapsed_ms <= self.budget_ms() {
                self.in_force.clone_from(&d.cap_prb);
            }
        }
        ControlOutput {
            decision: out.decision,
            elapsed_ms: out.elapsed_ms,
            weights: Some(out.weights),
        }
    }
}

/// The controller a run drives, chosen by the scenario.
pub enum RunController {
    Baseline(BaselineController),
    Agentic(Box<AgenticController>),
}

impl RunController {
    pub fn for_scenario(config: &ScenarioConfig) -> Self {
        match config.controller {
            ControllerKind::Agentic => {
                RunController::Agentic(Box::new(AgenticController::new(config)))
            }
            kind => RunController::Baseline(BaselineController::new(kind, config)),
        }
    }

    pub fn agentic(&self) -> Option<&AgenticController> {
        match self {
            RunController::Agentic(a) => Some(a),
            RunController::Baseline(_) => None,
        }
    }

    pub fn agentic_mut(&mut self) -> Option<&mut AgenticController> {
        match self {
            RunController::Agentic(a) => Some(a),
            RunController::Baseline(_) => None,
        }
    }

    pub fn policy(&self) -> Option<&PolicyObject> {
        self.agentic().map(|a| a.strategic.policy())
    }

    pub fn governance_view(&self) -> Option<GovernanceView> {
        self.agentic().map(|a| a.governance.view())
    }

    fn inner(&mut self) -> &mut dyn Controller {
        match self {
            RunController::Baseline(b) => b,
            RunController::Agentic(a) => a.as_mut(),
        }
    }
}

impl Controller for RunController {
    fn id(&self) -> &str {
        match self {
            RunController::Baseline(b) => b.id(),
            RunController::Agentic(a) => a.id(),
        }
    }

    fn budget_ms(&self) -> f64 {
        match self {
            RunController::Baseline(b) => b.budget_ms(),
            RunController::Agentic(a) => a.budget_ms(),
        }
    }

    fn observe(&mut self, t: f64, batch: &[KpmRecord], log: &mut EventLog) {
        self.inner().observe(t, batch, log);
    }

    fn decide(&mut self, t: f64, log: &mut EventLog) -> ControlOutput {
        self.inner().decide(t, log)
    }
}
