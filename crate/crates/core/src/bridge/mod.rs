//! Wire protocol that lets an external reasoning service act as the
//! strategic or tactical agent. Every response passes the same validators
//! as internally generated objects; any failure yields a fallback marker
//! and the caller keeps its rule-based path.

mod connector;
mod prompt;
mod reference;

use serde::{Deserialize, Serialize};

pub use connector::{
    Connector, ConnectorReply, FnConnector, HttpConnector, TransportFailure, BRIDGE_URL_ENV,
};
pub use prompt::render_prompt_context;
pub use reference::{reference_response, REFERENCE_AGENT};

use crate::domain::{decision_violations, validate_policy, GuardrailSet, Intent, PolicyObject};
use crate::strategic::{AnomalyReport, KpmSummary};
use crate::tactical::{CapProposal, SliceAggregate};

pub const BRIDGE_SCHEMA: &str = "bridge/v1";
pub const STRATEGIC_DEADLINE_MS: u64 = 10_000;
pub const TACTICAL_DEADLINE_MS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeRole {
    Strategic,
    Tactical,
}

/// An intent awaiting synthesis, with the operator's original words.
/// `intent` is absent when the utterance is outside the grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingIntent {
    pub utterance: String,
    pub intent: Option<Intent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategicContext {
    pub summaries: Vec<KpmSummary>,
    pub policy: PolicyObject,
    pub anomalies: AnomalyReport,
    pub pending_intents: Vec<PendingIntent>,
    pub guardrails: GuardrailSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacticalContext {
    pub t: f64,
    /// Window aggregates in policy slice order; `None` for empty slots.
    pub aggregates: Vec<Option<SliceAggregate>>,
    pub demands: Vec<u32>,
    pub policy: PolicyObject,
    pub last_caps: Option<Vec<u32>>,
    pub guardrails: GuardrailSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", content = "context", rename_all = "snake_case")]
pub enum BridgeContext {
    Strategic(StrategicContext),
    Tactical(TacticalContext),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub schema_version: String,
    pub deadline_ms: u64,
    #[serde(flatten)]
    pub context: BridgeContext,
}

impl BridgeRequest {
    pub fn strategic(context: StrategicContext, deadline_ms: u64) -> Self {
        Self {
            schema_version: BRIDGE_SCHEMA.into(),
            deadline_ms: deadline_ms.max(1),
            context: BridgeContext::Strategic(context),
        }
    }

    pub fn tactical(context: TacticalContext, deadline_ms: u64) -> Self {
        Self {
            schema_version: BRIDGE_SCHEMA.into(),
            deadline_ms: deadline_ms.max(1),
            context: BridgeContext::Tactical(context),
        }
    }

    pub fn role(&self) -> BridgeRole {
        match self.context {
            BridgeContext::Strategic(_) => BridgeRole::Strategic,
            BridgeContext::Tactical(_) => BridgeRole::Tactical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    pub schema_version: String,
    pub role: BridgeRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<CapProposal>,
    /// Stored for audit, never interpreted.
    #[serde(default)]
    pub rationale: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    NoConnector,
    Timeout,
    Transport,
    Schema,
    GuardrailViolation,
}

impl FallbackReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FallbackReason::NoConnector => "no_connector",
            FallbackReason::Timeout => "timeout",
            FallbackReason::Transport => "transport",
            FallbackReason::Schema => "schema",
            FallbackReason::GuardrailViolation => "guardrail_violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BridgeOutcome {
    Adopted {
        response: Box<BridgeResponse>,
    },
    Fallback {
        reason: FallbackReason,
        detail: String,
    },
}

impl BridgeOutcome {
    pub fn adopted(&self) -> Option<&BridgeResponse> {
        match self {
            BridgeOutcome::Adopted { response } => Some(response.as_ref()),
            BridgeOutcome::Fallback { .. } => None,
        }
    }

    pub fn fallback_reason(&self) -> Option<FallbackReason> {
        match self {
            BridgeOutcome::Fallback { reason, .. } => Some(*reason),
            BridgeOutcome::Adopted { .. } => None,
        }
    }
}

/// One request/response pair, kept verbatim for the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeExchange {
    pub role: BridgeRole,
    pub request: String,
    pub response: Option<String>,
    pub elapsed_ms: f64,
    pub outcome: BridgeOutcome,
}

fn fallback(reason: FallbackReason, detail: impl Into<String>) -> BridgeOutcome {
    BridgeOutcome::Fallback {
        reason,
        detail: detail.into(),
    }
}

/// Checks a parsed response against the request it answers.
pub fn validate_response(
    req: &BridgeRequest,
    resp: &BridgeResponse,
) -> Result<(), (FallbackReason, String)> {
    let schema = |m: String| Err((FallbackReason::Schema, m));
    if resp.schema_version != BRIDGE_SCHEMA {
        return schema(format!(
            "schema_version {:?}, expected {BRIDGE_SCHEMA}",
            resp.schema_version
        ));
    }
    if resp.role != req.role() {
        return schema(format!(
            "role {:?} answers a {:?} request",
            resp.role,
            req.role()
        ));
    }
    if !(resp.confidence.is_finite() && (0.0..=1.0).contains(&resp.confidence)) {
        return schema(format!("confidence {} outside [0, 1]", resp.confidence));
    }
    match &req.context {
        BridgeContext::Strategic(ctx) => {
            let Some(policy) = &resp.policy else {
                return schema("strategic response carries no policy".into());
            };
            let ids: Vec<_> = policy.slices.iter().map(|s| s.slice_id).collect();
            let expected: Vec<_> = ctx.policy.slices.iter().map(|s| s.slice_id).collect();
            if ids != expected {
                return schema(format!("policy slices {ids:?}, expected {expected:?}"));
            }
            let report = validate_policy(policy, &ctx.guardrails);
            if !report.ok {
                let rules: Vec<&str> = report
                    .violations
                    .iter()
                    .map(|v| v.rule_id.as_str())
                    .collect();
                return Err((FallbackReason::GuardrailViolation, rules.join(", ")));
            }
        }
        BridgeContext::Tactical(ctx) => {
            let Some(p) = &resp.proposal else {
                return schema("tactical response carries no proposal".into());
            };
            if p.cap_prb.len() != ctx.policy.slices.len() {
                return schema(format!(
                    "{} caps for {} slices",
                    p.cap_prb.len(),
                    ctx.policy.slices.len()
                ));
            }
            let v = decision_violations(
                &p.cap_prb,
                ctx.last_caps.as_deref(),
                &ctx.policy,
                ctx.guardrails.total_prb,
            );
            if !v.is_empty() {
                return Err((FallbackReason::GuardrailViolation, v.join("; ")));
            }
        }
    }
    Ok(())
}

/// Sends `req` through `connector` and validates the reply. Never fails:
/// every problem becomes a fallback outcome.
pub fn request_decision(
    req: &BridgeRequest,
    connector: Option<&mut dyn Connector>,
) -> BridgeExchange {
    let request = serde_json::to_string(req).expect("bridge request serializes");
    let Some(connector) = connector else {
        return BridgeExchange {
            role: req.role(),
            request,
            response: None,
            elapsed_ms: 0.0,
            outcome: fallback(FallbackReason::NoConnector, "no bridge configured"),
        };
    };
    let (response, elapsed_ms, outcome) = match connector.exchange(&request, req.deadline_ms) {
        Err(TransportFailure::Timeout { elapsed_ms }) => (
            None,
            elapsed_ms,
            fallback(
                FallbackReason::Timeout,
                format!("no reply within {} ms", req.deadline_ms),
            ),
        ),
        Err(TransportFailure::Transport { detail, elapsed_ms }) => (
            None,
            elapsed_ms,
            fallback(FallbackReason::Transport, detail),
        ),
        Ok(reply) if reply.elapsed_ms > req.deadline_ms as f64 => (
            Some(reply.body),
            reply.elapsed_ms,
            fallback(
                FallbackReason::Timeout,
                format!("reply after {} ms", reply.elapsed_ms),
            ),
        ),
        Ok(reply) => {
            let outcome = match serde_json::from_str::<BridgeResponse>(&reply.body) {
                Err(e) => fallback(FallbackReason::Schema, e.to_string()),
                Ok(resp) => match validate_response(req, &resp) {
                    Ok(()) => BridgeOutcome::Adopted {
                        response: Box::new(resp),
                    },
                    Err((reason, detail)) => fallback(reason, detail),
                },
            };
            (Some(reply.body), reply.elapsed_ms, outcome)
        }
    };
    BridgeExchange {
        role: req.role(),
        request,
        response,
        elapsed_ms,
        outcome,
    }
}

#[cfg(test)]
mod tests;
