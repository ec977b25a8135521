use super::{BridgeContext, BridgeRequest, BridgeResponse, BridgeRole, BRIDGE_SCHEMA};
use crate::domain::{apply_intent, PromotionConfig};
use crate::tactical::{project_caps, target_caps, CapProposal};

/// Controller id carried by proposals from the reference agent.
pub const REFERENCE_AGENT: &str = "bridge-agent";

/// Rule-based stand-in for an external reasoning service: folds pending
/// intents into the policy (strategic) or water-fills the supplied demands
/// within the step envelope (tactical).
pub fn reference_response(req: &BridgeRequest) -> BridgeResponse {
    match &req.context {
        BridgeContext::Strategic(ctx) => {
            let mut policy = ctx.policy.clone();
            let mut applied = Vec::new();
            for p in &ctx.pending_intents {
                let Some(intent) = &p.intent else { continue };
                if let Ok(next) = apply_intent(
                    &policy,
                    intent,
                    &ctx.guardrails,
                    &PromotionConfig::default(),
                ) {
                    policy = next;
                    applied.push(p.utterance.clone());
                }
            }
            if !applied.is_empty() {
                policy.version = ctx.policy.version + 1;
            }
            BridgeResponse {
                schema_version: BRIDGE_SCHEMA.into(),
                role: BridgeRole::Strategic,
                policy: Some(policy),
                proposal: None,
                rationale: if applied.is_empty() {
                    "no applicable intents; policy unchanged".into()
                } else {
                    format!("applied: {}", applied.join("; "))
                },
                confidence: 0.9,
            }
        }
        BridgeContext::Tactical(ctx) => {
            let total = ctx.guardrails.total_prb;
            let target = target_caps(&ctx.demands, &ctx.policy, total);
            let caps = project_caps(&target, ctx.last_caps.as_deref(), &ctx.policy, total)
                .unwrap_or_else(|_| ctx.last_caps.clone().unwrap_or_else(|| ctx.policy.floors()));
            BridgeResponse {
                schema_version: BRIDGE_SCHEMA.into(),
                role: BridgeRole::Tactical,
                policy: None,
                proposal: Some(CapProposal {
                    proposal_id: format!("{REFERENCE_AGENT}@{}", ctx.t),
                    controller_id: REFERENCE_AGENT.into(),
                    t: ctx.t,
                    cap_prb: caps,
                    priority: 1.0,
                    confidence: 0.9,
                    expected_impact: 0.0,
                }),
                rationale: format!("water-fill of demands {:?}", ctx.demands),
                confidence: 0.9,
            }
        }
    }
}
