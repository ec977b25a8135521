use serde::{Deserialize, Serialize};
use serde_json::json;

use super::arbitration::arbitrate;
use super::caps::{compute_caps, estimate_demands, projected_proposal, CapProposal, DemandModel};
use super::guard::{GuardConfig, GuardState};
use super::registry::{
    orchestrate, OrchestrationDirective, RegistryError, RegistryTransition, XappKind, XappRegistry,
};
use super::window::{KpmWindow, WindowError};
use super::{PipelineStep, TacticalPipeline, TacticalSnapshot};
use crate::baselines::{heuristic_alloc, reactive_alloc, HeuristicWeights};
use crate::bridge::{
    request_decision, BridgeExchange, BridgeRequest, Connector, TacticalContext,
    TACTICAL_DEADLINE_MS,
};
use crate::domain::{AllocationDecision, GuardrailSet, KpmRecord, PolicyObject, SliceId};
use crate::sim::{EventKind, EventLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacticalConfig {
    /// Backlog drain horizon of the SLM allocator, seconds.
    pub drain_horizon_s: f64,
    /// Drain horizon of the ML demand follower, seconds.
    pub ml_drain_horizon_s: f64,
    /// Virtual time one decision takes, milliseconds.
    pub decision_cost_ms: f64,
    /// Budget a decision must fit in, milliseconds.
    pub budget_ms: f64,
    pub guard: GuardConfig,
    pub heuristic: HeuristicWeights,
    pub bridge_deadline_ms: u64,
}

impl Default for TacticalConfig {
    fn default() -> Self {
        Self {
            drain_horizon_s: 2.0,
            ml_drain_horizon_s: 1.0,
            decision_cost_ms: 20.0,
            budget_ms: 100.0,
            guard: GuardConfig::default(),
            heuristic: HeuristicWeights::default(),
            bridge_deadline_ms: TACTICAL_DEADLINE_MS,
        }
    }
}

/// Result of one tactical decision round.
#[derive(Debug, Clone, PartialEq)]
pub struct TacticalOutput {
    pub decision: Option<AllocationDecision>,
    pub elapsed_ms: f64,
    /// Redistribution weights to install with the decision.
    pub weights: Vec<f64>,
    pub bridge: Option<BridgeExchange>,
}

/// The near-RT agent: owns the KPM window, the stability guard and the
/// xApp registry, and turns policy plus telemetry into cap decisions.
pub struct TacticalAgent {
    pipeline: TacticalPipeline,
    registry: XappRegistry,
    bytes_per_prb_per_second: Vec<f64>,
    total_prb: u32,
    guardrails: GuardrailSet,
    config: TacticalConfig,
    bridge: Option<Box<dyn Connector>>,
}

impl TacticalAgent {
    pub fn new(
        slice_ids: &[SliceId],
        bytes_per_prb_per_second: Vec<f64>,
        initial_caps: Vec<u32>,
        guardrails: GuardrailSet,
        config: TacticalConfig,
    ) -> Self {
        let total_prb = guardrails.total_prb;
        let model = DemandModel {
            drain_horizon_s: config.drain_horizon_s,
            bytes_per_prb_per_second: bytes_per_prb_per_second.clone(),
            total_prb,
        };
        Self {
            pipeline: TacticalPipeline::new(
                slice_ids,
                model,
                GuardState::with_caps(config.guard, initial_caps),
            ),
            registry: XappRegistry::standard(config.drain_horizon_s),
            bytes_per_prb_per_second,
            total_prb,
            guardrails,
            config,
            bridge: None,
        }
    }

    pub fn with_bridge(mut self, connector: Box<dyn Connector>) -> Self {
        self.bridge = Some(connector);
        self
    }

    pub fn config(&self) -> &TacticalConfig {
        &self.config
    }

    pub fn registry(&self) -> &XappRegistry {
        &self.registry
    }

    pub fn window(&self) -> &KpmWindow {
        &self.pipeline.window
    }

    pub fn guard(&self) -> &GuardState {
        &self.pipeline.guard
    }

    pub fn last_caps(&self) -> Option<&[u32]> {
        self.pipeline.guard.last_caps.as_deref()
    }

    pub fn snapshot(&self) -> TacticalSnapshot {
        self.pipeline.snapshot()
    }

    /// Demand model the SLM allocator uses, as configured in the registry.
    pub fn demand_model(&self) -> DemandModel {
        self.model_for(XappKind::Slm)
    }

    pub fn observe(&mut self, batch: &[KpmRecord]) -> Result<(), WindowError> {
        self.pipeline.observe(batch)
    }

    pub fn orchestrate(
        &mut self,
        directive: &OrchestrationDirective,
    ) -> Result<Vec<RegistryTransition>, RegistryError> {
        orchestrate(&mut self.registry, directive)
    }

    fn model_for(&self, kind: XappKind) -> DemandModel {
        let owner_cfg = self
            .registry
            .entries()
            .iter()
            .find(|e| e.kind == kind)
            .and_then(|e| e.config.get("drain_horizon_s"))
            .and_then(|v| v.as_f64())
            .filter(|h| h.is_finite() && *h > 0.0);
        let default = match kind {
            XappKind::Ml => self.config.ml_drain_horizon_s,
            _ => self.config.drain_horizon_s,
        };
        DemandModel {
            drain_horizon_s: owner_cfg.unwrap_or(default),
            bytes_per_prb_per_second: self.bytes_per_prb_per_second.clone(),
            total_prb: self.total_prb,
        }
    }

    fn owner_proposal(
        &self,
        t: f64,
        policy: &PolicyObject,
    ) -> Result<CapProposal, super::Infeasible> {
        let owner = self.registry.owner();
        let id = owner.controller_id.as_str();
        let window = &self.pipeline.window;
        let guard = &self.pipeline.guard;
        let model = self.model_for(owner.kind);
        match owner.kind {
            XappKind::Slm => compute_caps(window, policy, guard, &model, id, t),
            XappKind::Ml => projected_proposal(
                &reactive_alloc(window, &model),
                window,
                policy,
                guard,
                &model,
                id,
                t,
            ),
            XappKind::Legacy => projected_proposal(
                &heuristic_alloc(window, &model, &self.config.heuristic),
                window,
                policy,
                guard,
                &model,
                id,
                t,
            ),
        }
    }

    fn bridge_proposal(
        &mut self,
        t: f64,
        policy: &PolicyObject,
        log: &mut EventLog,
    ) -> Option<(CapProposal, BridgeExchange)> {
        let connector = self.bridge.as_deref_mut()?;
        let model = DemandModel {
            drain_horizon_s: self.config.drain_horizon_s,
            bytes_per_prb_per_second: self.bytes_per_prb_per_second.clone(),
            total_prb: self.total_prb,
        };
        let req = BridgeRequest::tactical(
            TacticalContext {
                t,
                aggregates: self.pipeline.window.aggregates(),
                demands: estimate_demands(&self.pipeline.window, &model),
                policy: policy.clone(),
                last_caps: self.pipeline.guard.last_caps.clone(),
                guardrails: self.guardrails.clone(),
            },
            self.config.bridge_deadline_ms,
        );
        let exchange = request_decision(&req, Some(connector));
        log.push(t, EventKind::Bridge, None, &exchange);
        let mut proposal = exchange.outcome.adopted()?.proposal.clone()?;
        proposal.t = t;
        proposal.priority = policy.controller_priority(&proposal.controller_id);
        Some((proposal, exchange))
    }

    /// One decision round: owner proposal (plus an optional bridge
    /// proposal), arbitration, then the stability guard.
    pub fn decide(&mut self, t: f64, policy: &PolicyObject, log: &mut EventLog) -> TacticalOutput {
        let weights = policy.priorities();
        let mut out = TacticalOutput {
            decision: None,
            elapsed_ms: self.config.decision_cost_ms,
            weights,
            bridge: None,
        };
        let mut proposals = Vec::new();
        match self.owner_proposal(t, policy) {
            Ok(p) => proposals.push(p),
            Err(e) => {
                log.push(
                    t,
                    EventKind::AllocationHeld,
                    e.slice_id,
                    json!({"controller_id": self.registry.owner().controller_id, "reason": e.reason, "caps_in_force": self.last_caps()}),
                );
            }
        }
        if let Some((p, exchange)) = self.bridge_proposal(t, policy, log) {
            proposals.push(p);
            out.bridge = Some(exchange);
        }
        let Some(arb) = arbitrate(&proposals, policy) else {
            return out;
        };
        if out.elapsed_ms > self.config.budget_ms {
            out.decision = Some(AllocationDecision {
                t,
                cap_prb: arb.winner.cap_prb,
                policy_version: policy.version,
                controller_id: arb.winner.controller_id,
                arbitration_trace: arb.trace,
            });
            return out;
        }
        match self.pipeline.commit(arb.winner, policy) {
            PipelineStep::Accepted(p) => {
                out.decision = Some(AllocationDecision {
                    t,
                    cap_prb: p.cap_prb,
                    policy_version: policy.version,
                    controller_id: p.controller_id,
                    arbitration_trace: arb.trace,
                });
            }
            PipelineStep::Deferred { proposal, reason } => {
                log.push(
                    t,
                    EventKind::AllocationDeferred,
                    None,
                    json!({"controller_id": proposal.controller_id, "reason": reason, "proposed": proposal.cap_prb, "caps_in_force": self.last_caps()}),
                );
            }
            PipelineStep::Infeasible(_) => {}
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{reference_response, BridgeContext, FnConnector, REFERENCE_AGENT};
    use crate::domain::{decision_violations, SliceClass, SliceSpec};
    use crate::sim::LogDetail;
    use crate::tactical::{LEGACY_CONTROLLER, ML_CONTROLLER, SLM_CONTROLLER};

    fn slices() -> Vec<SliceSpec> {
        (1..=4)
            .map(|id| SliceSpec {
                slice_id: id,
                class: SliceClass::Regular,
                latency_target: None,
                display_name: String::new(),
            })
            .collect()
    }

    fn policy() -> PolicyObject {
        let mut p = PolicyObject::permissive(&slices(), 100);
        p.max_step_prb = 10;
        p
    }

    fn batch(t: f64, backlog: [u64; 4]) -> Vec<KpmRecord> {
        (0..4)
            .map(|i| KpmRecord {
                t,
                slice_id: i as u32 + 1,
                dl_throughput: 1.0,
                buffer_occupancy: backlog[i],
                rlc_delay: 5.0,
                prb_used: 1000,
                prb_allocated: 2000,
            })
            .collect()
    }

    fn agent() -> TacticalAgent {
        TacticalAgent::new(
            &[1, 2, 3, 4],
            vec![50_000.0; 4],
            vec![25; 4],
            GuardrailSet::new(100),
            TacticalConfig::default(),
        )
    }

    #[test]
    fn slm_owner_moves_toward_demand_within_step() {
        let mut a = agent();
        let mut log = EventLog::new(LogDetail::Summary);
        a.observe(&batch(1.0, [2_000_000, 0, 0, 0])).unwrap();
        let out = a.decide(1.0, &policy(), &mut log);
        let d = out.decision.unwrap();
        assert_eq!(d.controller_id, SLM_CONTROLLER);
        assert_eq!(d.cap_prb[0], 35);
        assert!(decision_violations(&d.cap_prb, Some(&[25; 4]), &policy(), 100).is_empty());
        assert_eq!(d.arbitration_trace.len(), 1);
        assert_eq!(out.weights, vec![1.0; 4]);
    }

    #[test]
    fn rate_limit_defers_and_logs() {
        let mut a = agent();
        let mut log = EventLog::new(LogDetail::Summary);
        let mut p = policy();
        p.min_decision_interval = 5.0;
        a.observe(&batch(1.0, [2_000_000, 0, 0, 0])).unwrap();
        assert!(a.decide(1.0, &p, &mut log).decision.is_some());
        a.observe(&batch(2.0, [2_000_000, 0, 0, 0])).unwrap();
        assert!(a.decide(2.0, &p, &mut log).decision.is_none());
        assert_eq!(log.of_kind(EventKind::AllocationDeferred).count(), 1);
    }

    #[test]
    fn owner_switch_changes_controller() {
        for (directive, expected) in [
            (
                OrchestrationDirective::FallbackToHeuristic,
                LEGACY_CONTROLLER,
            ),
            (
                OrchestrationDirective::SwitchTo {
                    controller_id: ML_CONTROLLER.into(),
                },
                ML_CONTROLLER,
            ),
        ] {
            let mut a = agent();
            let mut log = EventLog::new(LogDetail::Summary);
            a.orchestrate(&directive).unwrap();
            a.observe(&batch(1.0, [2_000_000, 10, 10, 10])).unwrap();
            let d = a.decide(1.0, &policy(), &mut log).decision.unwrap();
            assert_eq!(d.controller_id, expected);
            assert!(decision_violations(&d.cap_prb, Some(&[25; 4]), &policy(), 100).is_empty());
        }
    }

    #[test]
    fn infeasible_policy_holds_caps() {
        let mut a = agent();
        let mut log = EventLog::new(LogDetail::Summary);
        let mut p = policy();
        p.slices[0].floor_prb = 60;
        let out = a.decide(0.0, &p, &mut log);
        assert!(out.decision.is_none());
        assert_eq!(log.of_kind(EventKind::AllocationHeld).count(), 1);
    }

    #[test]
    fn preferred_bridge_wins_arbitration() {
        let connector = FnConnector(|body: &str| {
            let req: BridgeRequest = serde_json::from_str(body).unwrap();
            assert!(matches!(req.context, BridgeContext::Tactical(_)));
            Ok((
                serde_json::to_string(&reference_response(&req)).unwrap(),
                50.0,
            ))
        });
        let mut a = agent().with_bridge(Box::new(connector));
        let mut log = EventLog::new(LogDetail::Summary);
        let mut p = policy();
        p.controller_priority.insert(REFERENCE_AGENT.into(), 2.0);
        a.observe(&batch(1.0, [2_000_000, 0, 0, 0])).unwrap();
        let out = a.decide(1.0, &p, &mut log);
        let d = out.decision.unwrap();
        assert_eq!(d.controller_id, REFERENCE_AGENT);
        assert_eq!(d.arbitration_trace.len(), 2);
        assert!(out.bridge.is_some());
        assert_eq!(log.of_kind(EventKind::Bridge).count(), 1);
    }

    #[test]
    fn failing_bridge_falls_back_to_owner() {
        let connector = FnConnector(|_: &str| Ok(("not json".to_string(), 1.0)));
        let mut a = agent().with_bridge(Box::new(connector));
        let mut log = EventLog::new(LogDetail::Summary);
        a.observe(&batch(1.0, [2_000_000, 0, 0, 0])).unwrap();
        let out = a.decide(1.0, &policy(), &mut log);
        assert_eq!(out.decision.unwrap().controller_id, SLM_CONTROLLER);
        assert_eq!(out.bridge, None);
    }
}
