use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::anomalies::{detect_anomalies, AnomalyConfig, AnomalyReport};
use super::grammar::{parse_intent, GrammarRejection};
use super::ladder::{
    corrective_ladder, ChangeRecord, ChangeSubject, CorrectiveDirective, DirectivePayload,
    LadderConfig, LadderContext, LadderMemory, Rung,
};
use super::summary::{attach_mean_caps, summarize_minute, KpmSummary, SummaryConfig};
use super::synthesis::synthesize_policy;
use super::twin::{twin_precheck, PrecheckReport, PrecheckStatus, TelemetryTrace};
use crate::bridge::{
    request_decision, BridgeExchange, BridgeRequest, Connector, PendingIntent, StrategicContext,
    STRATEGIC_DEADLINE_MS,
};
use crate::domain::{
    check_update_budget, GuardrailSet, Intent, IntentSource, KpmRecord, PolicyObject,
    PromotionConfig, SliceSpec, ValidationReport,
};
use crate::governance::GovernanceEngine;
use crate::sim::{EventKind, EventLog};
use crate::tactical::{
    reachable, OrchestrationDirective, TacticalAgent, TacticalSnapshot, LEGACY_CONTROLLER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategicConfig {
    pub summary: SummaryConfig,
    pub anomaly: AnomalyConfig,
    pub ladder: LadderConfig,
    pub promotion: PromotionConfig,
    /// Minute summaries kept for anomaly detection and bridge context.
    pub history_minutes: usize,
    /// Seconds of telemetry kept for twin replay.
    pub trace_seconds: usize,
    pub bridge_deadline_ms: u64,
}

impl Default for StrategicConfig {
    fn default() -> Self {
        Self {
            summary: SummaryConfig::default(),
            anomaly: AnomalyConfig::default(),
            ladder: LadderConfig::default(),
            promotion: PromotionConfig::default(),
            history_minutes: 10,
            trace_seconds: 120,
            bridge_deadline_ms: STRATEGIC_DEADLINE_MS,
        }
    }
}

/// Why an operator intent did not produce a policy.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntentError {
    #[error("utterance does not match the intent grammar")]
    Grammar(GrammarRejection),
    #[error("intent refused by guardrails")]
    Refused(ValidationReport),
    #[error("policy update budget exhausted")]
    Budget(ValidationReport),
    #[error("twin pre-check found violations")]
    Precheck(PrecheckReport),
}

/// Accepted intent and the policy version now in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentAck {
    pub intent: Option<Intent>,
    pub policy_version: u64,
    pub changed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precheck: Option<PrecheckReport>,
    pub via_bridge: bool,
}

/// What one minute boundary produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteOutcome {
    pub summary: KpmSummary,
    pub anomalies: AnomalyReport,
    pub directives: Vec<CorrectiveDirective>,
    pub policy_version: u64,
}

/// The non-RT agent: keeps the policy and its history, summarises
/// telemetry per minute, runs the corrective ladder, and turns intents
/// into checked policy updates.
pub struct StrategicAgent {
    policy: PolicyObject,
    snapshots: BTreeMap<u64, PolicyObject>,
    max_version: u64,
    issued_at: Vec<f64>,
    guardrails: GuardrailSet,
    display_names: Vec<String>,
    config: StrategicConfig,
    minute_records: Vec<KpmRecord>,
    minute_caps: Vec<Vec<u32>>,
    summaries: Vec<KpmSummary>,
    anomalies: AnomalyReport,
    ladder: LadderMemory,
    changes: Vec<ChangeRecord>,
    trace: VecDeque<(TacticalSnapshot, Vec<KpmRecord>)>,
    bridge: Option<Box<dyn Connector>>,
}

impl StrategicAgent {
    pub fn new(
        policy: PolicyObject,
        slices: &[SliceSpec],
        guardrails: GuardrailSet,
        config: StrategicConfig,
    ) -> Self {
        let mut snapshots = BTreeMap::new();
        snapshots.insert(policy.version, policy.clone());
        Self {
            max_version: policy.version,
            policy,
            snapshots,
            issued_at: Vec::new(),
            guardrails,
            display_names: slices.iter().map(|s| s.display_name.clone()).collect(),
            config,
            minute_records: Vec::new(),
            minute_caps: Vec::new(),
            summaries: Vec::new(),
            anomalies: AnomalyReport::default(),
            ladder: LadderMemory::default(),
            changes: Vec::new(),
            trace: VecDeque::new(),
            bridge: None,
        }
    }

    pub fn with_bridge(mut self, connector: Box<dyn Connector>) -> Self {
        self.bridge = Some(connector);
        self
    }

    pub fn policy(&self) -> &PolicyObject {
        &self.policy
    }

    /// Every policy version ever issued, byte-identical to when it was
    /// in force.
    pub fn policy_at(&self, version: u64) -> Option<&PolicyObject> {
        self.snapshots.get(&version)
    }

    pub fn summaries(&self) -> &[KpmSummary] {
        &self.summaries
    }

    pub fn anomalies(&self) -> &AnomalyReport {
        &self.anomalies
    }

    pub fn changes(&self) -> &[ChangeRecord] {
        &self.changes
    }

    pub fn guardrails(&self) -> &GuardrailSet {
        &self.guardrails
    }

    /// Recent telemetry with the tactical state it started from.
    pub fn trace(&self) -> Option<TelemetryTrace> {
        let (initial, _) = self.trace.front()?;
        Some(TelemetryTrace {
            initial: initial.clone(),
            batches: self.trace.iter().map(|(_, b)| b.clone()).collect(),
        })
    }

    /// Records one KPM batch. `before` is the tactical state prior to
    /// observing the batch and `caps` the caps in force during it.
    pub fn record_second(&mut self, before: TacticalSnapshot, batch: &[KpmRecord], caps: &[u32]) {
        self.minute_records.extend_from_slice(batch);
        self.minute_caps.push(caps.to_vec());
        self.trace.push_back((before, batch.to_vec()));
        while self.trace.len() > self.config.trace_seconds {
            self.trace.pop_front();
        }
    }

    fn slice_specs(&self) -> Vec<SliceSpec> {
        self.policy
            .slices
            .iter()
            .enumerate()
            .map(|(i, s)| SliceSpec {
                slice_id: s.slice_id,
                class: s.class,
                latency_target: s.latency_target,
                display_name: self.display_names.get(i).cloned().unwrap_or_default(),
            })
            .collect()
    }

    /// Closes the minute ending at `t`: summary, anomaly detection, the
    /// corrective ladder and execution of its directives.
    pub fn on_minute(
        &mut self,
        t: f64,
        tactical: &mut TacticalAgent,
        governance: &mut GovernanceEngine,
        log: &mut EventLog,
    ) -> MinuteOutcome {
        let minute = ((t / 60.0).round() as u64).saturating_sub(1);
        let ids: Vec<_> = self.policy.slices.iter().map(|s| s.slice_id).collect();
        let mut summary = summarize_minute(
            minute,
            &self.minute_records,
            &ids,
            self.policy.version,
            &self.config.summary,
        );
        attach_mean_caps(&mut summary, &self.minute_caps);
        self.minute_records.clear();
        self.minute_caps.clear();
        self.summaries.push(summary.clone());
        let excess = self
            .summaries
            .len()
            .saturating_sub(self.config.history_minutes.max(1));
        self.summaries.drain(..excess);

        self.anomalies =
            detect_anomalies(&self.summaries, &self.slice_specs(), &self.config.anomaly);
        for e in &self.anomalies.evidence {
            log.push(t, EventKind::Anomaly, Some(e.slice_id), e);
        }
        self.changes.extend(governance.take_changes());
        let directives = {
            let ctx = LadderContext {
                policy: &self.policy,
                registry: tactical.registry(),
                changes: &self.changes,
                drift: governance.drift(),
                total_prb: self.guardrails.total_prb,
                config: self.config.ladder,
            };
            corrective_ladder(&self.anomalies, &ctx, &mut self.ladder)
        };
        for d in &directives {
            log.push(t, EventKind::Directive, Some(d.slice_id), d);
        }
        self.execute(&directives, t, tactical, governance, log);
        MinuteOutcome {
            summary,
            anomalies: self.anomalies.clone(),
            directives,
            policy_version: self.policy.version,
        }
    }

    fn execute(
        &mut self,
        directives: &[CorrectiveDirective],
        t: f64,
        tactical: &mut TacticalAgent,
        governance: &mut GovernanceEngine,
        log: &mut EventLog,
    ) {
        let adjustments: Vec<CorrectiveDirective> = directives
            .iter()
            .filter(|d| d.rung == Rung::AdjustPolicy)
            .cloned()
            .collect();
        if !adjustments.is_empty() {
            let s = synthesize_policy(
                &self.policy,
                &[],
                &adjustments,
                &self.guardrails,
                &self.config.promotion,
            );
            for r in &s.refusals {
                log.push(
                    t,
                    EventKind::PolicyRefused,
                    None,
                    json!({"source": r.source, "report": r.report}),
                );
            }
            if s.changed {
                if let Err(e) = self.adopt(s.policy, t, true, tactical, log) {
                    log.push(
                        t,
                        EventKind::PolicyRefused,
                        None,
                        json!({"source": "corrective_ladder", "error": e.to_string()}),
                    );
                }
            }
        }
        for d in directives.iter().filter(|d| d.rung != Rung::AdjustPolicy) {
            match &d.payload {
                DirectivePayload::RollbackPolicy { to_version } => {
                    self.rollback_policy(*to_version, t, log)
                }
                DirectivePayload::SwitchXapp { to } => {
                    let directive = if to == LEGACY_CONTROLLER {
                        OrchestrationDirective::FallbackToHeuristic
                    } else {
                        OrchestrationDirective::SwitchTo {
                            controller_id: to.clone(),
                        }
                    };
                    match tactical.orchestrate(&directive) {
                        Ok(transitions) if !transitions.is_empty() => {
                            log.push(
                                t,
                                EventKind::Registry,
                                None,
                                json!({"directive": directive, "transitions": transitions}),
                            );
                        }
                        Ok(_) => {}
                        Err(e) => log.push(
                            t,
                            EventKind::Registry,
                            None,
                            json!({"directive": directive, "error": e.to_string()}),
                        ),
                    }
                }
                DirectivePayload::RollbackModel { model_id } => {
                    governance.apply_directive(&d.payload, t, log);
                    for c in &mut self.changes {
                        if matches!(&c.subject, ChangeSubject::Model { model_id: m, .. } if m == model_id)
                        {
                            c.revertible = false;
                        }
                    }
                }
                other => {
                    governance.apply_directive(other, t, log);
                }
            }
        }
    }

    /// Restores an earlier policy byte for byte, version number included.
    fn rollback_policy(&mut self, to_version: u64, t: f64, log: &mut EventLog) {
        let Some(restored) = self.snapshots.get(&to_version).cloned() else {
            log.push(t, EventKind::PolicyRefused, None, json!({"source": "rollback", "reason": format!("no snapshot of version {to_version}")}));
            return;
        };
        if restored == self.policy {
            return;
        }
        let from = self.policy.version;
        for c in &mut self.changes {
            if matches!(c.subject, ChangeSubject::Policy { to_version: v, .. } if v == from) {
                c.revertible = false;
            }
        }
        self.changes.push(ChangeRecord {
            t,
            subject: ChangeSubject::Policy {
                from_version: from,
                to_version,
            },
            revertible: false,
        });
        log.push(
            t,
            EventKind::Policy,
            None,
            json!({"rollback_from": from, "policy": restored}),
        );
        self.policy = restored;
    }

    /// Gates a candidate through the update budget, reachability and the
    /// twin pre-check, then issues it as the next version.
    fn adopt(
        &mut self,
        mut candidate: PolicyObject,
        t: f64,
        revertible: bool,
        tactical: &TacticalAgent,
        log: &mut EventLog,
    ) -> Result<Option<PrecheckReport>, IntentError> {
        let budget = check_update_budget(&self.issued_at, t, &self.guardrails);
        if !budget.ok {
            log.push(t, EventKind::PolicyRefused, None, &budget);
            return Err(IntentError::Budget(budget));
        }
        if let Err(e) = reachable(&candidate, tactical.last_caps(), self.guardrails.total_prb) {
            let report = ValidationReport::single("unreachable", "slices", e.reason);
            log.push(t, EventKind::PolicyRefused, e.slice_id, &report);
            return Err(IntentError::Refused(report));
        }
        let precheck = self
            .trace()
            .map(|trace| twin_precheck(&candidate, &trace, &self.policy, &tactical.demand_model()));
        if let Some(report) = &precheck {
            log.push(t, EventKind::Precheck, None, report);
            if report.status == PrecheckStatus::Failed {
                return Err(IntentError::Precheck(report.clone()));
            }
        }
        let from = self.policy.version;
        self.max_version += 1;
        candidate.version = self.max_version;
        candidate.issued_at = t;
        self.snapshots.insert(candidate.version, candidate.clone());
        self.issued_at.push(t);
        self.changes.push(ChangeRecord {
            t,
            subject: ChangeSubject::Policy {
                from_version: from,
                to_version: candidate.version,
            },
            revertible,
        });
        log.push(t, EventKind::Policy, None, &candidate);
        self.policy = candidate;
        Ok(precheck)
    }

    fn ask_bridge(
        &mut self,
        utterance: &str,
        intent: Option<&Intent>,
        t: f64,
        log: &mut EventLog,
    ) -> Option<PolicyObject> {
        let connector = self.bridge.as_deref_mut()?;
        let req = BridgeRequest::strategic(
            StrategicContext {
                summaries: self.summaries.clone(),
                policy: self.policy.clone(),
                anomalies: self.anomalies.clone(),
                pending_intents: vec![PendingIntent {
                    utterance: utterance.into(),
                    intent: intent.cloned(),
                }],
                guardrails: self.guardrails.clone(),
            },
            self.config.bridge_deadline_ms,
        );
        let exchange: BridgeExchange = request_decision(&req, Some(connector));
        log.push(t, EventKind::Bridge, None, &exchange);
        exchange.outcome.adopted()?.policy.clone()
    }

    /// Handles an operator utterance received at `t`.
    pub fn submit_intent(
        &mut self,
        utterance: &str,
        t: f64,
        tactical: &TacticalAgent,
        log: &mut EventLog,
    ) -> Result<IntentAck, IntentError> {
        let result = self.submit_inner(utterance, t, tactical, log);
        match &result {
            Ok(ack) => log.push(
                t,
                EventKind::Intent,
                ack.intent.as_ref().map(|i| i.target_slice),
                json!({"utterance": utterance, "ack": ack}),
            ),
            Err(e) => log.push(
                t,
                EventKind::IntentRejected,
                None,
                json!({"utterance": utterance, "error": e.to_string()}),
            ),
        }
        result
    }

    fn submit_inner(
        &mut self,
        utterance: &str,
        t: f64,
        tactical: &TacticalAgent,
        log: &mut EventLog,
    ) -> Result<IntentAck, IntentError> {
        let parsed = parse_intent(utterance).map(|i| i.at(t, IntentSource::Operator));
        if let Some(mut candidate) = self.ask_bridge(utterance, parsed.as_ref().ok(), t, log) {
            if candidate.same_rules(&self.policy) {
                return Ok(IntentAck {
                    intent: parsed.ok(),
                    policy_version: self.policy.version,
                    changed: false,
                    precheck: None,
                    via_bridge: true,
                });
            }
            candidate.intent_tag = utterance.into();
            let precheck = self.adopt(candidate, t, false, tactical, log)?;
            return Ok(IntentAck {
                intent: parsed.ok(),
                policy_version: self.policy.version,
                changed: true,
                precheck,
                via_bridge: true,
            });
        }
        let intent = parsed.map_err(IntentError::Grammar)?;
        let s = synthesize_policy(
            &self.policy,
            std::slice::from_ref(&intent),
            &[],
            &self.guardrails,
            &self.config.promotion,
        );
        if let Some(r) = s.refusals.into_iter().next() {
            return Err(IntentError::Refused(r.report));
        }
        if !s.changed {
            return Ok(IntentAck {
                intent: Some(intent),
                policy_version: self.policy.version,
                changed: false,
                precheck: None,
                via_bridge: false,
            });
        }
        let precheck = self.adopt(s.policy, t, false, tactical, log)?;
        Ok(IntentAck {
            intent: Some(intent),
            policy_version: self.policy.version,
            changed: true,
            precheck,
            via_bridge: false,
        })
    }
}
